#include "eegkd/distill.hpp"

#include <cmath>

#include "eegkd/errors.hpp"
#include "eegkd/signal.hpp"

namespace eegkd::distill {

namespace {
constexpr double kCosEps = 1e-8;
constexpr double kL2Eps = 1e-12;

// view of one flattened channel map
struct Slice {
    const double* p;
    int64_t n;
};

Slice channel_map(const Tensor& f, int sample, int channel) {
    const int64_t hw = int64_t(f.dim(2)) * f.dim(3);
    return {f.ptr() + (int64_t(sample) * f.dim(1) + channel) * hw, hw};
}

double slice_dot(Slice a, Slice b) {
    double s = 0;
    for (int64_t i = 0; i < a.n; ++i) s += a.p[i] * b.p[i];
    return s;
}

double slice_norm(Slice a) { return std::sqrt(slice_dot(a, a)); }

} // namespace

Criterion criterion_from_string(const std::string& s) {
    if (s == "cosine") return Criterion::Cosine;
    if (s == "dot") return Criterion::Dot;
    if (s == "l2") return Criterion::L2;
    if (s == "plv") return Criterion::Plv;
    throw ConfigError("unknown similarity criterion '" + s + "'");
}

std::string to_string(Criterion c) {
    switch (c) {
        case Criterion::Cosine: return "cosine";
        case Criterion::Dot: return "dot";
        case Criterion::L2: return "l2";
        case Criterion::Plv: return "plv";
    }
    return "?";
}

void DistillConfig::validate() const {
    if (beta < 0) throw ConfigError("distill: beta must be >= 0");
    if (alpha < 0 || alpha > 1) throw ConfigError("distill: alpha must be in [0, 1]");
    if (temperature <= 0) throw ConfigError("distill: temperature must be > 0");
    if (beta > 0 && layer_pairs.empty())
        throw ConfigError("distill: layer_pairs must be nonempty when beta > 0");
    for (const auto& [t, s] : layer_pairs)
        for (const std::string& n : {t, s})
            if (n != "LF1" && n != "LF2" && n != "LF3")
                throw ConfigError("distill: unknown tap name '" + n + "'");
}

Tensor zero_center(const Tensor& f, CenteringScope scope) {
    if (f.ndim() != 4) throw ArgumentError("zero_center: expected N x C x H x W");
    const int N = f.dim(0), C = f.dim(1);
    const int64_t hw = int64_t(f.dim(2)) * f.dim(3);
    Tensor out = f;
    if (scope == CenteringScope::Batch) {
        for (int c = 0; c < C; ++c) {
            double mean = 0;
            for (int n = 0; n < N; ++n) {
                const Slice s = channel_map(f, n, c);
                for (int64_t i = 0; i < hw; ++i) mean += s.p[i];
            }
            mean /= double(int64_t(N) * hw);
            for (int n = 0; n < N; ++n) {
                double* p = out.ptr() + (int64_t(n) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) p[i] -= mean;
            }
        }
    } else {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const Slice s = channel_map(f, n, c);
                double mean = 0;
                for (int64_t i = 0; i < hw; ++i) mean += s.p[i];
                mean /= double(hw);
                double* p = out.ptr() + (int64_t(n) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) p[i] -= mean;
            }
    }
    return out;
}

namespace {

// centering is linear; its backward applies the same mean removal to the
// incoming gradient
Tensor zero_center_backward(const Tensor& g, CenteringScope scope) {
    return zero_center(g, scope);
}

// PLV goes through its own phasor path below; these cover the pointwise criteria.
double pair_similarity(Criterion crit, Slice a, Slice b) {
    switch (crit) {
        case Criterion::Cosine: {
            const double na = std::max(slice_norm(a), kCosEps);
            const double nb = std::max(slice_norm(b), kCosEps);
            return slice_dot(a, b) / (na * nb);
        }
        case Criterion::Dot:
            return slice_dot(a, b);
        case Criterion::L2: {
            double ssq = 0;
            for (int64_t i = 0; i < a.n; ++i) {
                const double d = a.p[i] - b.p[i];
                ssq += d * d;
            }
            return -std::sqrt(ssq);
        }
        case Criterion::Plv:
            throw ArgumentError("plv handled by the phasor path");
    }
    return 0;
}

// d sim(a, b) / d a accumulated into ga with weight w (and symmetrically gb)
void pair_similarity_backward(Criterion crit, Slice a, Slice b, double w, double* ga, double* gb) {
    switch (crit) {
        case Criterion::Cosine: {
            const double na = slice_norm(a), nb = slice_norm(b);
            const double da = std::max(na, kCosEps), db = std::max(nb, kCosEps);
            const double d = slice_dot(a, b);
            for (int64_t i = 0; i < a.n; ++i) {
                double gia = b.p[i] / (da * db);
                if (na > kCosEps) gia -= d * a.p[i] / (da * da * da * db);
                ga[i] += w * gia;
                double gib = a.p[i] / (da * db);
                if (nb > kCosEps) gib -= d * b.p[i] / (da * db * db * db);
                gb[i] += w * gib;
            }
            break;
        }
        case Criterion::Dot:
            for (int64_t i = 0; i < a.n; ++i) {
                ga[i] += w * b.p[i];
                gb[i] += w * a.p[i];
            }
            break;
        case Criterion::L2: {
            double ssq = 0;
            for (int64_t i = 0; i < a.n; ++i) {
                const double d = a.p[i] - b.p[i];
                ssq += d * d;
            }
            const double dist = std::sqrt(ssq);
            if (dist < kL2Eps) break; // subgradient 0 at coincident maps
            for (int64_t i = 0; i < a.n; ++i) {
                const double g = -(a.p[i] - b.p[i]) / dist;
                ga[i] += w * g;
                gb[i] -= w * g;
            }
            break;
        }
        case Criterion::Plv:
            throw ArgumentError("plv handled by the phasor path");
    }
}

} // namespace

namespace {

// PLV needs one analytic signal per (sample, channel), not per pair.
// Precompute the unit phasors once; every pair entry is then a plain dot
// product, and gradients accumulate on the phasors before a single
// backward pass through the analytic-signal construction.
void plv_matrix_path(const Tensor& fc, const Tensor& grad_values, bool want_grad,
                     Tensor& values, Tensor* grad_fc) {
    using cplx = signal::cplx;
    constexpr double eps = 1e-12;
    const int N = fc.dim(0), C = fc.dim(1);
    const int64_t L = int64_t(fc.dim(2)) * fc.dim(3);

    std::vector<std::vector<cplx>> analytic(size_t(N) * size_t(C));
    std::vector<std::vector<cplx>> phasor(size_t(N) * size_t(C));
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const Slice s = channel_map(fc, n, c);
            std::vector<double> series(s.p, s.p + s.n);
            auto A = signal::analytic_signal(series);
            std::vector<cplx> u(size_t(L), cplx(0, 0));
            for (int64_t t = 0; t < L; ++t) {
                const double r = std::abs(A[size_t(t)]);
                u[size_t(t)] = r > eps ? A[size_t(t)] / r : cplx(0, 0);
            }
            analytic[size_t(n) * C + size_t(c)] = std::move(A);
            phasor[size_t(n) * C + size_t(c)] = std::move(u);
        }

    auto pair_mean = [&](int i, int j, int c) {
        const auto& ui = phasor[size_t(i) * C + size_t(c)];
        const auto& uj = phasor[size_t(j) * C + size_t(c)];
        cplx m(0, 0);
        for (int64_t t = 0; t < L; ++t) m += ui[size_t(t)] * std::conj(uj[size_t(t)]);
        return m / double(L);
    };

    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            double acc = 0;
            for (int c = 0; c < C; ++c) acc += std::abs(pair_mean(i, j, c));
            values.at(i, j) = acc / double(C);
            values.at(j, i) = values.at(i, j);
        }

    if (!want_grad) return;

    std::vector<std::vector<cplx>> g_u(size_t(N) * size_t(C),
                                       std::vector<cplx>(size_t(L), cplx(0, 0)));
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            double w = grad_values.at(i, j);
            if (j != i) w += grad_values.at(j, i);
            w /= double(C);
            if (w == 0.0) continue;
            for (int c = 0; c < C; ++c) {
                const cplx m = pair_mean(i, j, c);
                const double p = std::abs(m);
                if (p <= eps) continue;
                const cplx gm = m / p * w;
                const auto& ui = phasor[size_t(i) * C + size_t(c)];
                const auto& uj = phasor[size_t(j) * C + size_t(c)];
                auto& gi = g_u[size_t(i) * C + size_t(c)];
                auto& gj = g_u[size_t(j) * C + size_t(c)];
                const cplx gmc = std::conj(gm);
                for (int64_t t = 0; t < L; ++t) {
                    gi[size_t(t)] += uj[size_t(t)] * gm / double(L);
                    gj[size_t(t)] += ui[size_t(t)] * gmc / double(L);
                }
            }
        }

    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const auto& A = analytic[size_t(n) * C + size_t(c)];
            const auto& gu = g_u[size_t(n) * C + size_t(c)];
            std::vector<cplx> gA(size_t(L), cplx(0, 0));
            for (int64_t t = 0; t < L; ++t) {
                const double x = A[size_t(t)].real(), y = A[size_t(t)].imag();
                const double r = std::abs(A[size_t(t)]);
                if (r <= eps) continue;
                const double r3 = r * r * r;
                const cplx g = gu[size_t(t)];
                gA[size_t(t)] = cplx((g.real() * y - g.imag() * x) * y / r3,
                                     (g.imag() * x - g.real() * y) * x / r3);
            }
            const auto gs = signal::analytic_signal_backward(gA);
            double* dst = grad_fc->ptr() + (int64_t(n) * C + c) * L;
            for (int64_t t = 0; t < L; ++t) dst[size_t(t)] += gs[size_t(t)];
        }
}

} // namespace

SimilarityMatrix similarity_matrix(const Tensor& f, Criterion criterion, bool centered,
                                   CenteringScope scope) {
    return similarity_matrix_with_grad(f, criterion, centered, scope, Tensor(), nullptr);
}

SimilarityMatrix similarity_matrix_with_grad(const Tensor& f, Criterion criterion, bool centered,
                                             CenteringScope scope, const Tensor& grad_values,
                                             Tensor* grad_f) {
    if (f.ndim() != 4) throw ArgumentError("similarity_matrix: expected N x C x H x W");
    const int N = f.dim(0), C = f.dim(1);
    if (N < 1) throw ArgumentError("similarity_matrix: empty batch");

    const Tensor fc = centered ? zero_center(f, scope) : f;
    SimilarityMatrix M;
    M.criterion = criterion;
    M.centered = centered;
    M.values = Tensor({N, N});

    Tensor grad_fc;
    const bool want_grad = grad_f != nullptr;
    if (want_grad) grad_fc = Tensor(f.shape);

    if (criterion == Criterion::Plv) {
        plv_matrix_path(fc, grad_values, want_grad, M.values, want_grad ? &grad_fc : nullptr);
    } else {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                double acc = 0;
                for (int c = 0; c < C; ++c) {
                    const Slice a = channel_map(fc, i, c);
                    const Slice b = channel_map(fc, j, c);
                    acc += pair_similarity(criterion, a, b);
                    if (want_grad) {
                        // both (i,j) and (j,i) entries feed this channel term
                        double w = grad_values.at(i, j);
                        if (j != i) w += grad_values.at(j, i);
                        w /= double(C);
                        if (w != 0.0) {
                            double* ga = grad_fc.ptr() + (int64_t(i) * C + c) * a.n;
                            double* gb = grad_fc.ptr() + (int64_t(j) * C + c) * a.n;
                            pair_similarity_backward(criterion, a, b, w, ga, gb);
                        }
                    }
                }
                M.values.at(i, j) = acc / double(C);
                M.values.at(j, i) = M.values.at(i, j);
            }
    }

    if (want_grad) *grad_f = centered ? zero_center_backward(grad_fc, scope) : grad_fc;
    return M;
}

double sk_loss(const models::TapSet& teacher, const models::TapSet& student,
               const DistillConfig& cfg) {
    return sk_loss_with_grad(teacher, student, cfg, nullptr);
}

std::map<std::string, Tensor> TapGrads::as_map() const {
    std::map<std::string, Tensor> m;
    if (lf1) m["LF1"] = *lf1;
    if (lf2) m["LF2"] = *lf2;
    if (lf3) m["LF3"] = *lf3;
    return m;
}

namespace {
void accumulate_tap_grad(TapGrads& grads, const std::string& tap, const Tensor& g) {
    auto& slot = tap == "LF1" ? grads.lf1 : (tap == "LF2" ? grads.lf2 : grads.lf3);
    if (!slot) slot = g;
    else *slot += g;
}
} // namespace

double sk_loss_with_grad(const models::TapSet& teacher, const models::TapSet& student,
                         const DistillConfig& cfg, TapGrads* student_grads) {
    cfg.validate();
    double loss = 0;
    for (const auto& [tap_t, tap_s] : cfg.layer_pairs) {
        const Tensor& ft = teacher.tap(tap_t);
        const Tensor& fs = student.tap(tap_s);
        if (ft.dim(0) != fs.dim(0))
            throw DistillError("sk_loss: teacher/student batch sizes differ (" +
                               std::to_string(ft.dim(0)) + " vs " + std::to_string(fs.dim(0)) + ")");
        const int N = ft.dim(0);

        const SimilarityMatrix mt = similarity_matrix(ft, cfg.criterion, cfg.centered,
                                                      cfg.centering_scope);
        SimilarityMatrix ms;
        Tensor grad_fs;
        if (student_grads) {
            // first pass for the matrix, second for mse grad routed back
            ms = similarity_matrix(fs, cfg.criterion, cfg.centered, cfg.centering_scope);
            Tensor gM({N, N});
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j)
                    gM.at(i, j) = 2.0 * (ms.values.at(i, j) - mt.values.at(i, j)) / double(N * N);
            similarity_matrix_with_grad(fs, cfg.criterion, cfg.centered, cfg.centering_scope, gM,
                                        &grad_fs);
            accumulate_tap_grad(*student_grads, tap_s, grad_fs);
        } else {
            ms = similarity_matrix(fs, cfg.criterion, cfg.centered, cfg.centering_scope);
        }

        double mse = 0;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const double d = mt.values.at(i, j) - ms.values.at(i, j);
                mse += d * d;
            }
        loss += mse / double(N * N);
    }
    return loss;
}

namespace {
// row-wise log-softmax
void log_softmax_row(const double* z, int K, double* out) {
    double mx = z[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
    double lse = 0;
    for (int k = 0; k < K; ++k) lse += std::exp(z[k] - mx);
    lse = mx + std::log(lse);
    for (int k = 0; k < K; ++k) out[k] = z[k] - lse;
}
} // namespace

double cross_entropy(const Tensor& logits, const std::vector<int>& y, Tensor* grad) {
    const int N = logits.dim(0), K = logits.dim(1);
    if (int(y.size()) != N) throw ArgumentError("cross_entropy: label count mismatch");
    std::vector<double> ls(size_t(K), 0.0);
    double loss = 0;
    if (grad) *grad = Tensor({N, K});
    for (int n = 0; n < N; ++n) {
        log_softmax_row(&logits.at(n, 0), K, ls.data());
        loss -= ls[size_t(y[size_t(n)])];
        if (grad)
            for (int k = 0; k < K; ++k)
                grad->at(n, k) = (std::exp(ls[size_t(k)]) - (k == y[size_t(n)] ? 1.0 : 0.0)) / N;
    }
    return loss / N;
}

double hkd_loss(const Tensor& z_teacher, const Tensor& z_student, const std::vector<int>& y,
                double alpha, double temperature, Tensor* grad_z_student) {
    if (!z_teacher.same_shape(z_student)) throw ArgumentError("hkd_loss: logits shape mismatch");
    if (temperature <= 0) throw ArgumentError("hkd_loss: temperature must be > 0");
    const int N = z_student.dim(0), K = z_student.dim(1);
    const double T = temperature;

    Tensor ce_grad;
    const double ce = cross_entropy(z_student, y, grad_z_student ? &ce_grad : nullptr);

    double kl = 0;
    Tensor kl_grad;
    if (grad_z_student) kl_grad = Tensor({N, K});
    std::vector<double> lt(size_t(K), 0.0), lsv(size_t(K), 0.0), zt(size_t(K), 0.0), zs(size_t(K), 0.0);
    for (int n = 0; n < N; ++n) {
        for (int k = 0; k < K; ++k) {
            zt[size_t(k)] = z_teacher.at(n, k) / T;
            zs[size_t(k)] = z_student.at(n, k) / T;
        }
        log_softmax_row(zt.data(), K, lt.data());
        log_softmax_row(zs.data(), K, lsv.data());
        for (int k = 0; k < K; ++k) {
            const double p = std::exp(lt[size_t(k)]);
            kl += p * (lt[size_t(k)] - lsv[size_t(k)]);
            if (grad_z_student) {
                const double q = std::exp(lsv[size_t(k)]);
                // d/dz_s of T^2 * KL / N, with softening 1/T
                kl_grad.at(n, k) = T * (q - p) / N;
            }
        }
    }
    kl /= N;

    const double loss = (1.0 - alpha) * ce + alpha * T * T * kl;
    if (grad_z_student) {
        *grad_z_student = Tensor({N, K});
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k)
                grad_z_student->at(n, k) =
                    (1.0 - alpha) * ce_grad.at(n, k) + alpha * kl_grad.at(n, k);
    }
    return loss;
}

LossBreakdown total_loss(const BatchOutputs& batch, const DistillConfig& cfg, Tensor* grad_logits,
                         TapGrads* tap_grads) {
    cfg.validate();
    if (!batch.student) throw DistillError("total_loss: student outputs missing");
    const bool needs_teacher = cfg.use_logits_loss || cfg.beta > 0;
    if (needs_teacher && !batch.teacher) throw DistillError("total_loss: teacher outputs missing");

    LossBreakdown out;
    Tensor ce_grad;
    out.ce = cross_entropy(batch.student->logits, batch.y, grad_logits ? &ce_grad : nullptr);

    if (cfg.use_logits_loss) {
        const int N = batch.student->logits.dim(0), K = batch.student->logits.dim(1);
        const double T = cfg.temperature;
        double kl = 0;
        Tensor kl_grad;
        if (grad_logits) kl_grad = Tensor({N, K});
        std::vector<double> lt(size_t(K), 0.0), ls(size_t(K), 0.0), zt(size_t(K), 0.0), zs(size_t(K), 0.0);
        if (!batch.teacher->logits.same_shape(batch.student->logits))
            throw DistillError("total_loss: teacher/student logits shape mismatch");
        for (int n = 0; n < N; ++n) {
            for (int k = 0; k < K; ++k) {
                zt[size_t(k)] = batch.teacher->logits.at(n, k) / T;
                zs[size_t(k)] = batch.student->logits.at(n, k) / T;
            }
            log_softmax_row(zt.data(), K, lt.data());
            log_softmax_row(zs.data(), K, ls.data());
            for (int k = 0; k < K; ++k) {
                const double p = std::exp(lt[size_t(k)]);
                kl += p * (lt[size_t(k)] - ls[size_t(k)]);
                if (grad_logits) {
                    const double q = std::exp(ls[size_t(k)]);
                    kl_grad.at(n, k) = T * (q - p) / N;
                }
            }
        }
        kl /= N;
        out.kl = kl;
        out.term_ce = (1.0 - cfg.alpha) * out.ce;
        out.term_kl = cfg.alpha * T * T * kl;
        if (grad_logits) {
            *grad_logits = Tensor({N, K});
            for (int n = 0; n < N; ++n)
                for (int k = 0; k < K; ++k)
                    grad_logits->at(n, k) =
                        (1.0 - cfg.alpha) * ce_grad.at(n, k) + cfg.alpha * kl_grad.at(n, k);
        }
    } else {
        out.term_ce = out.ce;
        out.term_kl = 0;
        if (grad_logits) *grad_logits = ce_grad;
    }

    if (cfg.beta > 0) {
        out.sk = tap_grads ? sk_loss_with_grad(*batch.teacher, *batch.student, cfg, tap_grads)
                           : sk_loss(*batch.teacher, *batch.student, cfg);
        out.term_sk = cfg.beta * out.sk;
        if (tap_grads) {
            // scale the raw SK gradients by beta
            for (auto* g : {&tap_grads->lf1, &tap_grads->lf2, &tap_grads->lf3})
                if (*g)
                    for (double& v : (*g)->data) v *= cfg.beta;
        }
    } else {
        out.sk = 0;
        out.term_sk = 0;
    }

    out.total = out.term_ce + out.term_kl + out.term_sk;
    return out;
}

double plv_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ArgumentError("plv_similarity: length mismatch");
    if (a.size() < 4) throw ArgumentError("plv_similarity: need length >= 4");
    return signal::plv(a, b);
}

} // namespace eegkd::distill
