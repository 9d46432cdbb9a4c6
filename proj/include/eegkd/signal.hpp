#pragma once

#include <complex>
#include <vector>

#include "eegkd/tensor.hpp"

namespace eegkd::signal {

using cplx = std::complex<double>;

// In-place FFT for any length (radix-2 or Bluestein). invert selects the
// unnormalized inverse; callers divide by n themselves when they need it.
void fft(std::vector<cplx>& x, bool invert);

// Analytic signal via the frequency-domain Hilbert construction.
std::vector<cplx> analytic_signal(const std::vector<double>& x);

// Backprop companion of analytic_signal: grad wrt the real input given the
// real-pair gradient on the complex output. Same spectral mask, adjoint path.
std::vector<double> analytic_signal_backward(const std::vector<cplx>& grad_out);

// |mean_t exp(i (phi_a - phi_b))| with phases from the analytic signal.
double plv(const std::vector<double>& a, const std::vector<double>& b);

// PLV plus gradients wrt both inputs (nullptr to skip one side).
double plv_with_grad(const std::vector<double>& a, const std::vector<double>& b,
                     std::vector<double>* grad_a, std::vector<double>* grad_b);

// Polyphase rational resampling with a Kaiser-windowed anti-alias low-pass.
// Output length is round(samples * fs_dst / fs_src) per channel.
Tensor resample(const Tensor& signal, double fs_src, double fs_dst);

// IIR transfer function in (b, a) form, a[0] == 1.
struct Iir {
    std::vector<double> b;
    std::vector<double> a;
};

// Butterworth band-pass of the given prototype order (order 4 -> 8 poles).
Iir butter_bandpass(int order, double low_hz, double high_hz, double fs);

// Zero-phase forward-backward filtering with odd-reflection padding and
// steady-state initial conditions, matched to the common scipy behavior.
std::vector<double> filtfilt(const Iir& f, const std::vector<double>& x);

// 4-38 Hz style zero-phase band-pass over a channels x samples matrix.
Tensor bandpass(const Tensor& signal, double low_hz, double high_hz, double fs, int order = 4);

} // namespace eegkd::signal
