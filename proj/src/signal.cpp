#include "eegkd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "eegkd/errors.hpp"

namespace eegkd::signal {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }

void fft_pow2(std::vector<cplx>& a, bool invert) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2 * kPi / double(len) * (invert ? 1.0 : -1.0);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein chirp-z for arbitrary lengths.
void fft_bluestein(std::vector<cplx>& a, bool invert) {
    const size_t n = a.size();
    size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;
    std::vector<cplx> w(n);
    for (size_t k = 0; k < n; ++k) {
        // angle = pi * k^2 / n, computed mod 2n to stay accurate for large k
        uint64_t k2 = (uint64_t(k) * k) % (2 * n);
        double ang = kPi * double(k2) / double(n) * (invert ? 1.0 : -1.0);
        w[k] = cplx(std::cos(ang), -std::sin(ang));
    }
    std::vector<cplx> x(m, cplx(0, 0)), y(m, cplx(0, 0));
    for (size_t k = 0; k < n; ++k) x[k] = a[k] * w[k];
    y[0] = std::conj(w[0]);
    for (size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(w[k]);
    fft_pow2(x, false);
    fft_pow2(y, false);
    for (size_t k = 0; k < m; ++k) x[k] *= y[k];
    fft_pow2(x, true);
    for (size_t k = 0; k < n; ++k) a[k] = x[k] * w[k] / double(m);
}

double bessel_i0(double x) {
    // power series; converges fast for the beta range used here
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 64; ++k) {
        term *= (x / (2.0 * k)) * (x / (2.0 * k));
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

std::vector<double> kaiser_sinc_lowpass(int half_len, double cutoff, double beta) {
    // cutoff normalized to Nyquist (1.0 == fs/2); odd length 2*half_len+1
    const int n = 2 * half_len + 1;
    std::vector<double> h(size_t(n), 0.0);
    const double i0b = bessel_i0(beta);
    for (int i = 0; i < n; ++i) {
        const double m = i - half_len;
        double sinc = (m == 0) ? cutoff : std::sin(kPi * cutoff * m) / (kPi * m);
        const double r = 2.0 * i / (n - 1) - 1.0;
        const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        h[size_t(i)] = sinc * win;
    }
    // unity DC gain
    double s = std::accumulate(h.begin(), h.end(), 0.0);
    for (double& v : h) v /= s;
    return h;
}

uint64_t rational_gcd(uint64_t a, uint64_t b) { return b == 0 ? a : rational_gcd(b, a % b); }

// direct-form II transposed single pass
std::vector<double> lfilter(const Iir& f, const std::vector<double>& x, const std::vector<double>& zi) {
    const size_t nb = f.b.size(), na = f.a.size();
    const size_t nz = std::max(nb, na) - 1;
    std::vector<double> z(zi);
    z.resize(nz, 0.0);
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double yi = (nb > 0 ? f.b[0] * xi : 0.0) + (nz > 0 ? z[0] : 0.0);
        for (size_t k = 0; k + 1 < nz; ++k) {
            double bt = (k + 1 < nb) ? f.b[k + 1] * xi : 0.0;
            double at = (k + 1 < na) ? f.a[k + 1] * yi : 0.0;
            z[k] = bt + z[k + 1] - at;
        }
        if (nz > 0) {
            double bt = (nz < nb) ? f.b[nz] * xi : 0.0;
            double at = (nz < na) ? f.a[nz] * yi : 0.0;
            z[nz - 1] = bt - at;
        }
        y[i] = yi;
    }
    return y;
}

// steady-state initial conditions for a unit step (lfilter_zi)
std::vector<double> lfilter_zi(const Iir& f) {
    const size_t n = std::max(f.b.size(), f.a.size());
    std::vector<double> b(f.b), a(f.a);
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    const size_t m = n - 1;
    // solve (I - companion(a)^T) zi = B
    std::vector<double> M(m * m, 0.0), rhs(m);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j) {
            const double aij = (j == 0) ? -a[i + 1] : (j == i + 1 ? 1.0 : 0.0);
            M[i * m + j] = (i == j ? 1.0 : 0.0) - aij;
        }
    for (size_t i = 0; i < m; ++i) rhs[i] = b[i + 1] - b[0] * a[i + 1];
    // gaussian elimination with partial pivoting
    for (size_t col = 0; col < m; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < m; ++r)
            if (std::abs(M[r * m + col]) > std::abs(M[piv * m + col])) piv = r;
        if (piv != col) {
            for (size_t c = 0; c < m; ++c) std::swap(M[col * m + c], M[piv * m + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        const double d = M[col * m + col];
        if (std::abs(d) < 1e-300) throw ArgumentError("singular system in filter initialization");
        for (size_t r = col + 1; r < m; ++r) {
            const double fct = M[r * m + col] / d;
            for (size_t c = col; c < m; ++c) M[r * m + c] -= fct * M[col * m + c];
            rhs[r] -= fct * rhs[col];
        }
    }
    std::vector<double> zi(m);
    for (size_t ri = m; ri-- > 0;) {
        double s = rhs[ri];
        for (size_t c = ri + 1; c < m; ++c) s -= M[ri * m + c] * zi[c];
        zi[ri] = s / M[ri * m + ri];
    }
    return zi;
}

// polynomial from complex roots; imaginary residue must cancel
std::vector<double> poly_from_roots(const std::vector<cplx>& roots) {
    std::vector<cplx> p{cplx(1, 0)};
    for (const cplx& r : roots) {
        std::vector<cplx> q(p.size() + 1, cplx(0, 0));
        for (size_t i = 0; i < p.size(); ++i) {
            q[i] += p[i];
            q[i + 1] -= p[i] * r;
        }
        p = std::move(q);
    }
    std::vector<double> out(p.size());
    for (size_t i = 0; i < p.size(); ++i) out[i] = p[i].real();
    return out;
}

cplx polyval(const std::vector<double>& c, cplx z) {
    cplx acc(0, 0);
    for (double v : c) acc = acc * z + v;
    return acc;
}

} // namespace

void fft(std::vector<cplx>& x, bool invert) {
    if (x.empty()) return;
    if (is_pow2(x.size())) fft_pow2(x, invert);
    else fft_bluestein(x, invert);
}

std::vector<cplx> analytic_signal(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<cplx> X(n);
    for (size_t i = 0; i < n; ++i) X[i] = cplx(x[i], 0);
    fft(X, false);
    // one-sided mask: keep DC (and Nyquist for even n), double positives
    for (size_t k = 0; k < n; ++k) {
        double w;
        if (k == 0 || (n % 2 == 0 && k == n / 2)) w = 1.0;
        else if (k < (n + 1) / 2) w = 2.0;
        else w = 0.0;
        X[k] *= w;
    }
    fft(X, true);
    for (auto& v : X) v /= double(n);
    return X;
}

std::vector<double> analytic_signal_backward(const std::vector<cplx>& grad_out) {
    const size_t n = grad_out.size();
    std::vector<cplx> G(grad_out);
    fft(G, false);
    for (size_t k = 0; k < n; ++k) {
        double w;
        if (k == 0 || (n % 2 == 0 && k == n / 2)) w = 1.0;
        else if (k < (n + 1) / 2) w = 2.0;
        else w = 0.0;
        G[k] *= w;
    }
    fft(G, true);
    std::vector<double> g(n);
    for (size_t k = 0; k < n; ++k) g[k] = G[k].real() / double(n);
    return g;
}

double plv(const std::vector<double>& a, const std::vector<double>& b) {
    return plv_with_grad(a, b, nullptr, nullptr);
}

double plv_with_grad(const std::vector<double>& a, const std::vector<double>& b,
                     std::vector<double>* grad_a, std::vector<double>* grad_b) {
    if (a.size() != b.size()) throw ArgumentError("plv: length mismatch");
    if (a.empty()) throw ArgumentError("plv: empty input");
    const size_t n = a.size();
    constexpr double eps = 1e-12;

    const auto A = analytic_signal(a);
    const auto B = analytic_signal(b);
    std::vector<cplx> u(n), v(n);
    std::vector<double> ra(n), rb(n);
    cplx m(0, 0);
    for (size_t t = 0; t < n; ++t) {
        ra[t] = std::abs(A[t]);
        rb[t] = std::abs(B[t]);
        u[t] = ra[t] > eps ? A[t] / ra[t] : cplx(0, 0);
        v[t] = rb[t] > eps ? B[t] / rb[t] : cplx(0, 0);
        m += u[t] * std::conj(v[t]);
    }
    m /= double(n);
    const double p = std::abs(m);

    if (grad_a || grad_b) {
        // real-pair gradient of |m| wrt m
        cplx gm = p > eps ? m / p : cplx(0, 0);
        if (grad_a) {
            std::vector<cplx> gA(n, cplx(0, 0));
            for (size_t t = 0; t < n; ++t) {
                if (ra[t] <= eps) continue;
                const cplx gu = v[t] * gm / double(n); // d p / d u_t (real-pair form)
                const double x = A[t].real(), y = A[t].imag(), r3 = ra[t] * ra[t] * ra[t];
                gA[t] = cplx((gu.real() * y - gu.imag() * x) * y / r3,
                             (gu.imag() * x - gu.real() * y) * x / r3);
            }
            *grad_a = analytic_signal_backward(gA);
        }
        if (grad_b) {
            std::vector<cplx> gB(n, cplx(0, 0));
            for (size_t t = 0; t < n; ++t) {
                if (rb[t] <= eps) continue;
                // m depends on conj(v_t): d/dRe(v) = conj of u path, sign flip on Im
                const cplx g = std::conj(u[t]) * gm / double(n);
                const cplx gv(g.real(), -g.imag());
                const double x = B[t].real(), y = B[t].imag(), r3 = rb[t] * rb[t] * rb[t];
                gB[t] = cplx((gv.real() * y - gv.imag() * x) * y / r3,
                             (gv.imag() * x - gv.real() * y) * x / r3);
            }
            *grad_b = analytic_signal_backward(gB);
        }
    }
    return p;
}

Tensor resample(const Tensor& sig, double fs_src, double fs_dst) {
    if (fs_src <= 0 || fs_dst <= 0) throw ArgumentError("resample: sampling rates must be positive");
    if (sig.ndim() != 2) throw ArgumentError("resample: expected channels x samples");
    const int C = sig.dim(0), S = sig.dim(1);
    if (fs_src == fs_dst) return sig;

    // reduce fs ratio to integers (handles rates like 250.0 and 256.0)
    const uint64_t a = uint64_t(std::llround(fs_dst * 1000.0));
    const uint64_t b = uint64_t(std::llround(fs_src * 1000.0));
    const uint64_t g = rational_gcd(a, b);
    const int64_t up = int64_t(a / g), down = int64_t(b / g);

    const int64_t n_out = std::llround(double(S) * fs_dst / fs_src);
    const int half = 10 * int(std::max(up, down));
    const auto h = kaiser_sinc_lowpass(half, 1.0 / double(std::max(up, down)), 5.0);
    const int64_t nh = int64_t(h.size());

    Tensor out({C, int(n_out)});
    for (int c = 0; c < C; ++c) {
        const double* x = sig.ptr() + int64_t(c) * S;
        double* y = out.ptr() + int64_t(c) * n_out;
        for (int64_t m = 0; m < n_out; ++m) {
            // upsampled-grid position of output sample, compensating filter delay
            const int64_t p = m * down + half;
            double acc = 0.0;
            // x contributes at upsampled indices q = j*up; h index = p - q
            int64_t j_lo = (p - (nh - 1) + up - 1) / up; // ceil((p-nh+1)/up)
            int64_t j_hi = p / up;
            j_lo = std::max<int64_t>(j_lo, 0);
            j_hi = std::min<int64_t>(j_hi, S - 1);
            for (int64_t j = j_lo; j <= j_hi; ++j) acc += x[j] * h[size_t(p - j * up)];
            y[m] = acc * double(up);
        }
    }
    return out;
}

Iir butter_bandpass(int order, double low_hz, double high_hz, double fs) {
    if (!(low_hz > 0 && low_hz < high_hz && high_hz < fs / 2))
        throw ArgumentError("bandpass: need 0 < low < high < fs/2");
    const double fs2 = 2.0 * fs;
    const double wl = fs2 * std::tan(kPi * low_hz / fs);
    const double wh = fs2 * std::tan(kPi * high_hz / fs);
    const double bw = wh - wl, w0 = std::sqrt(wl * wh);

    std::vector<cplx> sp;
    for (int k = 0; k < order; ++k) {
        const double ang = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
        sp.emplace_back(std::cos(ang), std::sin(ang));
    }
    // low-pass prototype -> band-pass poles
    std::vector<cplx> poles;
    for (const cplx& p : sp) {
        const cplx ph = p * (bw / 2.0);
        const cplx d = std::sqrt(ph * ph - w0 * w0);
        poles.push_back(ph + d);
        poles.push_back(ph - d);
    }
    // bilinear transform; N zeros at z=1, N at z=-1
    std::vector<cplx> zp, zz;
    for (const cplx& s : poles) zp.push_back((fs2 + s) / (fs2 - s));
    for (int k = 0; k < order; ++k) {
        zz.emplace_back(1.0, 0.0);
        zz.emplace_back(-1.0, 0.0);
    }
    Iir f;
    f.b = poly_from_roots(zz);
    f.a = poly_from_roots(zp);

    // normalize to unit gain at the (warped) center frequency
    const double wc = 2.0 * std::atan(w0 / fs2);
    const cplx z = std::exp(cplx(0, wc));
    const double g = std::abs(polyval(f.b, z) / polyval(f.a, z));
    for (double& v : f.b) v /= g;
    return f;
}

std::vector<double> filtfilt(const Iir& f, const std::vector<double>& x) {
    const size_t order = std::max(f.b.size(), f.a.size());
    const size_t padlen = 3 * order;
    if (x.size() <= padlen) throw ArgumentError("filtfilt: signal shorter than padding length");

    // odd reflection about both endpoints
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * padlen);
    for (size_t i = padlen; i >= 1; --i) ext.push_back(2 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (size_t i = 2; i <= padlen + 1; ++i) ext.push_back(2 * x.back() - x[x.size() - i]);

    const auto zi = lfilter_zi(f);
    auto scaled = [&](double x0) {
        std::vector<double> z(zi);
        for (double& v : z) v *= x0;
        return z;
    };
    std::vector<double> y = lfilter(f, ext, scaled(ext.front()));
    std::reverse(y.begin(), y.end());
    y = lfilter(f, y, scaled(y.front()));
    std::reverse(y.begin(), y.end());
    return {y.begin() + long(padlen), y.begin() + long(padlen + x.size())};
}

Tensor bandpass(const Tensor& sig, double low_hz, double high_hz, double fs, int order) {
    if (sig.ndim() != 2) throw ArgumentError("bandpass: expected channels x samples");
    const Iir f = butter_bandpass(order, low_hz, high_hz, fs);
    const int C = sig.dim(0), S = sig.dim(1);
    Tensor out({C, S});
    for (int c = 0; c < C; ++c) {
        std::vector<double> row(sig.ptr() + int64_t(c) * S, sig.ptr() + int64_t(c + 1) * S);
        auto y = filtfilt(f, row);
        std::copy(y.begin(), y.end(), out.ptr() + int64_t(c) * S);
    }
    return out;
}

} // namespace eegkd::signal
