#include "eegkd/nn.hpp"

#include <cmath>
#include <cstring>

#include "eegkd/errors.hpp"

namespace eegkd::nn {

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kh, int kw, int pad_top,
               int pad_bottom, int pad_left, int pad_right, int groups, bool bias)
    : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), pt_(pad_top),
      pb_(pad_bottom), pl_(pad_left), pr_(pad_right), groups_(groups), has_bias_(bias),
      weight_(name_ + ".weight", {out_ch, in_ch / groups, kh, kw}),
      bias_(name_ + ".bias", {bias ? out_ch : 0}) {
    if (in_ch % groups != 0 || out_ch % groups != 0)
        throw BuildError(name_ + ": channels not divisible by groups");
}

Conv2d* Conv2d::same_width(std::string name, int in_ch, int out_ch, int kh, int kw, int groups,
                           bool bias) {
    const int total = kw - 1;
    return new Conv2d(std::move(name), in_ch, out_ch, kh, kw, 0, 0, total / 2, total - total / 2,
                      groups, bias);
}

void Conv2d::init(Rng& rng) {
    const int fan_in = (in_ch_ / groups_) * kh_ * kw_;
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (double& w : weight_.value.data) w = rng.uniform(-bound, bound);
    for (double& b : bias_.value.data) b = rng.uniform(-bound, bound);
}

std::vector<Param*> Conv2d::params() {
    std::vector<Param*> p{&weight_};
    if (has_bias_) p.push_back(&bias_);
    return p;
}

Tensor Conv2d::forward(const Tensor& x, Mode mode) {
    if (x.ndim() != 4 || x.dim(1) != in_ch_)
        throw InferenceError(name_ + ": input shape mismatch");
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int Ho = H + pt_ + pb_ - kh_ + 1;
    const int Wo = W + pl_ + pr_ - kw_ + 1;
    if (Ho < 1 || Wo < 1) throw BuildError(name_ + ": kernel larger than padded input");
    const int icg = in_ch_ / groups_, ocg = out_ch_ / groups_;

    Tensor y({N, out_ch_, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int g = 0; g < groups_; ++g)
            for (int oc = g * ocg; oc < (g + 1) * ocg; ++oc) {
                const double b = has_bias_ ? bias_.value.data[size_t(oc)] : 0.0;
                for (int ho = 0; ho < Ho; ++ho)
                    for (int wo = 0; wo < Wo; ++wo) {
                        double acc = b;
                        for (int ic = 0; ic < icg; ++ic)
                            for (int kh = 0; kh < kh_; ++kh) {
                                const int hi = ho + kh - pt_;
                                if (hi < 0 || hi >= H) continue;
                                const double* xrow = &x.at(n, g * icg + ic, hi, 0);
                                const double* wrow = &weight_.value.at(oc, ic, kh, 0);
                                const int w_lo = std::max(0, pl_ - wo);
                                const int w_hi = std::min(kw_, W + pl_ - wo);
                                for (int kw = w_lo; kw < w_hi; ++kw)
                                    acc += xrow[wo + kw - pl_] * wrow[kw];
                            }
                        y.at(n, oc, ho, wo) = acc;
                    }
            }
    if (mode == Mode::Train) cached_x_ = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const Tensor& x = cached_x_;
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int Ho = gy.dim(2), Wo = gy.dim(3);
    const int icg = in_ch_ / groups_, ocg = out_ch_ / groups_;

    Tensor gx({N, in_ch_, H, W});
    for (int n = 0; n < N; ++n)
        for (int g = 0; g < groups_; ++g)
            for (int oc = g * ocg; oc < (g + 1) * ocg; ++oc)
                for (int ho = 0; ho < Ho; ++ho)
                    for (int wo = 0; wo < Wo; ++wo) {
                        const double gv = gy.at(n, oc, ho, wo);
                        if (gv == 0.0) continue;
                        if (has_bias_) bias_.grad.data[size_t(oc)] += gv;
                        for (int ic = 0; ic < icg; ++ic)
                            for (int kh = 0; kh < kh_; ++kh) {
                                const int hi = ho + kh - pt_;
                                if (hi < 0 || hi >= H) continue;
                                const double* xrow = &x.at(n, g * icg + ic, hi, 0);
                                double* gxrow = &gx.at(n, g * icg + ic, hi, 0);
                                double* gwrow = &weight_.grad.at(oc, ic, kh, 0);
                                const double* wrow = &weight_.value.at(oc, ic, kh, 0);
                                const int w_lo = std::max(0, pl_ - wo);
                                const int w_hi = std::min(kw_, W + pl_ - wo);
                                for (int kw = w_lo; kw < w_hi; ++kw) {
                                    gwrow[kw] += gv * xrow[wo + kw - pl_];
                                    gxrow[wo + kw - pl_] += gv * wrow[kw];
                                }
                            }
                    }
    return gx;
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double eps, double momentum)
    : name_(std::move(name)), ch_(channels), eps_(eps), momentum_(momentum),
      gamma_(name_ + ".gamma", {channels}), beta_(name_ + ".beta", {channels}),
      running_mean_({channels}), running_var_({channels}) {}

void BatchNorm2d::init(Rng&) {
    gamma_.value.fill(1.0);
    beta_.value.fill(0.0);
    running_mean_.fill(0.0);
    running_var_.fill(1.0);
}

std::vector<Param*> BatchNorm2d::params() { return {&gamma_, &beta_}; }
std::vector<Tensor*> BatchNorm2d::buffers() { return {&running_mean_, &running_var_}; }

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (C != ch_) throw InferenceError(name_ + ": channel mismatch");
    const int64_t cnt = int64_t(N) * H * W;
    Tensor y(x.shape);

    if (mode == Mode::Train) {
        cached_xhat_ = Tensor(x.shape);
        cached_invstd_.assign(size_t(C), 0.0);
        cached_train_ = true;
        cached_count_ = cnt;
        for (int c = 0; c < C; ++c) {
            double mean = 0;
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) mean += x.at(n, c, h, w);
            mean /= double(cnt);
            double var = 0;
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        const double d = x.at(n, c, h, w) - mean;
                        var += d * d;
                    }
            var /= double(cnt); // biased, used for normalization
            const double invstd = 1.0 / std::sqrt(var + eps_);
            cached_invstd_[size_t(c)] = invstd;
            const double g = gamma_.value.data[size_t(c)], b = beta_.value.data[size_t(c)];
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        const double xh = (x.at(n, c, h, w) - mean) * invstd;
                        cached_xhat_.at(n, c, h, w) = xh;
                        y.at(n, c, h, w) = g * xh + b;
                    }
            const double unbiased = cnt > 1 ? var * double(cnt) / double(cnt - 1) : var;
            running_mean_.data[size_t(c)] = (1 - momentum_) * running_mean_.data[size_t(c)] + momentum_ * mean;
            running_var_.data[size_t(c)] = (1 - momentum_) * running_var_.data[size_t(c)] + momentum_ * unbiased;
        }
    } else {
        // no member writes in eval mode: a frozen model may run concurrently
        for (int c = 0; c < C; ++c) {
            const double invstd = 1.0 / std::sqrt(running_var_.data[size_t(c)] + eps_);
            const double g = gamma_.value.data[size_t(c)];
            const double scale = g * invstd;
            const double b = beta_.value.data[size_t(c)] - scale * running_mean_.data[size_t(c)];
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w)
                        y.at(n, c, h, w) = scale * x.at(n, c, h, w) + b;
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    const int N = gy.dim(0), C = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
    Tensor gx(gy.shape);
    if (!cached_train_) throw InferenceError(name_ + ": backward requires a train-mode forward");
    const double cnt = double(cached_count_);
    for (int c = 0; c < C; ++c) {
        double sum_gy = 0, sum_gy_xh = 0;
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double g = gy.at(n, c, h, w);
                    sum_gy += g;
                    sum_gy_xh += g * cached_xhat_.at(n, c, h, w);
                }
        gamma_.grad.data[size_t(c)] += sum_gy_xh;
        beta_.grad.data[size_t(c)] += sum_gy;
        const double gsc = gamma_.value.data[size_t(c)] * cached_invstd_[size_t(c)];
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double g = gy.at(n, c, h, w);
                    const double xh = cached_xhat_.at(n, c, h, w);
                    gx.at(n, c, h, w) = gsc * (g - sum_gy / cnt - xh * sum_gy_xh / cnt);
                }
    }
    return gx;
}

// ------------------------------------------------------------- activations

Tensor Elu::forward(const Tensor& x, Mode mode) {
    Tensor y(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double v = x.data[i];
        y.data[i] = v > 0 ? v : alpha_ * (std::exp(v) - 1.0);
    }
    if (mode == Mode::Train) cached_y_ = y;
    return y;
}

Tensor Elu::backward(const Tensor& gy) {
    Tensor gx(gy.shape);
    for (size_t i = 0; i < gy.data.size(); ++i) {
        const double y = cached_y_.data[i];
        gx.data[i] = gy.data[i] * (y > 0 ? 1.0 : y + alpha_);
    }
    return gx;
}

Tensor Square::forward(const Tensor& x, Mode mode) {
    Tensor y(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] * x.data[i];
    if (mode == Mode::Train) cached_x_ = x;
    return y;
}

Tensor Square::backward(const Tensor& gy) {
    Tensor gx(gy.shape);
    for (size_t i = 0; i < gy.data.size(); ++i) gx.data[i] = 2.0 * cached_x_.data[i] * gy.data[i];
    return gx;
}

Tensor SafeLog::forward(const Tensor& x, Mode mode) {
    Tensor y(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::log(std::max(x.data[i], floor_));
    if (mode == Mode::Train) cached_x_ = x;
    return y;
}

Tensor SafeLog::backward(const Tensor& gy) {
    Tensor gx(gy.shape);
    for (size_t i = 0; i < gy.data.size(); ++i) {
        const double x = cached_x_.data[i];
        gx.data[i] = x > floor_ ? gy.data[i] / x : 0.0;
    }
    return gx;
}

// ---------------------------------------------------------------- pooling

AvgPool2d::AvgPool2d(std::string name, int kh, int kw, int sh, int sw)
    : name_(std::move(name)), kh_(kh), kw_(kw), sh_(sh), sw_(sw) {}

Tensor AvgPool2d::forward(const Tensor& x, Mode mode) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = (H - kh_) / sh_ + 1;
    const int Wo = (W - kw_) / sw_ + 1;
    if (H < kh_ || W < kw_) throw BuildError(name_ + ": pool window larger than input");
    Tensor y({N, C, Ho, Wo});
    const double inv = 1.0 / double(kh_ * kw_);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    double acc = 0;
                    for (int i = 0; i < kh_; ++i)
                        for (int j = 0; j < kw_; ++j) acc += x.at(n, c, ho * sh_ + i, wo * sw_ + j);
                    y.at(n, c, ho, wo) = acc * inv;
                }
    if (mode == Mode::Train) cached_in_shape_ = x.shape;
    return y;
}

Tensor AvgPool2d::backward(const Tensor& gy) {
    Tensor gx(cached_in_shape_);
    const int N = gy.dim(0), C = gy.dim(1), Ho = gy.dim(2), Wo = gy.dim(3);
    const double inv = 1.0 / double(kh_ * kw_);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    const double g = gy.at(n, c, ho, wo) * inv;
                    for (int i = 0; i < kh_; ++i)
                        for (int j = 0; j < kw_; ++j) gx.at(n, c, ho * sh_ + i, wo * sw_ + j) += g;
                }
    return gx;
}

// ---------------------------------------------------------------- dropout

Tensor Dropout::forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Eval || p_ <= 0.0) return x; // no member writes in eval
    mask_.resize(x.data.size());
    const double scale = 1.0 / (1.0 - p_);
    Tensor y(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        mask_[i] = rng_->uniform() < p_ ? 0.0 : scale;
        y.data[i] = x.data[i] * mask_[i];
    }
    return y;
}

Tensor Dropout::backward(const Tensor& gy) {
    if (mask_.empty()) return gy;
    Tensor gx(gy.shape);
    for (size_t i = 0; i < gy.data.size(); ++i) gx.data[i] = gy.data[i] * mask_[i];
    return gx;
}

// ---------------------------------------------------------------- reshape

Tensor Reshape::forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Train) cached_in_shape_ = x.shape;
    std::vector<int> s(target_);
    for (int& d : s)
        if (d == -1) d = x.dim(0);
    return x.reshaped(s);
}

Tensor Reshape::backward(const Tensor& gy) { return gy.reshaped(cached_in_shape_); }

// ----------------------------------------------------------------- linear

Linear::Linear(std::string name, int in_features, int out_features)
    : name_(std::move(name)), in_f_(in_features), out_f_(out_features),
      weight_(name_ + ".weight", {out_features, in_features}), bias_(name_ + ".bias", {out_features}) {}

void Linear::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(in_f_));
    for (double& w : weight_.value.data) w = rng.uniform(-bound, bound);
    for (double& b : bias_.value.data) b = rng.uniform(-bound, bound);
}

std::vector<Param*> Linear::params() { return {&weight_, &bias_}; }

Tensor Linear::forward(const Tensor& x, Mode mode) {
    if (x.ndim() != 2 || x.dim(1) != in_f_) throw InferenceError(name_ + ": input shape mismatch");
    const int N = x.dim(0);
    Tensor y({N, out_f_});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < out_f_; ++o) {
            double acc = bias_.value.data[size_t(o)];
            const double* xr = &x.at(n, 0);
            const double* wr = &weight_.value.at(o, 0);
            for (int i = 0; i < in_f_; ++i) acc += xr[i] * wr[i];
            y.at(n, o) = acc;
        }
    if (mode == Mode::Train) cached_x_ = x;
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    const int N = gy.dim(0);
    Tensor gx({N, in_f_});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < out_f_; ++o) {
            const double g = gy.at(n, o);
            if (g == 0.0) continue;
            bias_.grad.data[size_t(o)] += g;
            const double* xr = &cached_x_.at(n, 0);
            double* gwr = &weight_.grad.at(o, 0);
            double* gxr = &gx.at(n, 0);
            const double* wr = &weight_.value.at(o, 0);
            for (int i = 0; i < in_f_; ++i) {
                gwr[i] += g * xr[i];
                gxr[i] += g * wr[i];
            }
        }
    return gx;
}

// ------------------------------------------------------------------ model

void Model::init_params(uint64_t seed) {
    Rng rng(derive_seed(seed, "param-init"));
    for (auto& l : layers_) l->init(rng);
    reseed_dropout(derive_seed(seed, "dropout"));
}

Tensor Model::forward(const Tensor& x, Mode mode) { return forward(x, mode, nullptr); }

Tensor Model::forward(const Tensor& x, Mode mode, std::map<std::string, Tensor>* taps_out) {
    Tensor cur = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
        cur = layers_[i]->forward(cur, mode);
        if (taps_out)
            for (const auto& [name, idx] : taps_)
                if (idx == int(i)) (*taps_out)[name] = cur;
    }
    return cur;
}

void Model::backward(const Tensor& grad_logits, const std::map<std::string, Tensor>& tap_grads) {
    Tensor g = grad_logits;
    for (size_t i = layers_.size(); i-- > 0;) {
        for (const auto& [name, idx] : taps_) {
            if (idx == int(i)) {
                auto it = tap_grads.find(name);
                if (it != tap_grads.end()) {
                    if (!g.same_shape(it->second))
                        throw DistillError("tap gradient shape mismatch at " + name);
                    g += it->second;
                }
            }
        }
        g = layers_[i]->backward(g);
    }
}

std::vector<Param*> Model::params() {
    std::vector<Param*> out;
    for (auto& l : layers_)
        for (Param* p : l->params()) out.push_back(p);
    return out;
}

std::vector<Tensor*> Model::buffers() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* b : l->buffers()) out.push_back(b);
    return out;
}

void Model::zero_grad() {
    for (Param* p : params()) p->zero_grad();
}

int64_t Model::count_parameters() {
    int64_t n = 0;
    for (Param* p : params()) n += p->value.numel();
    return n;
}

std::vector<Tensor> Model::state_dict() {
    std::vector<Tensor> out;
    for (Param* p : params()) out.push_back(p->value);
    for (Tensor* b : buffers()) out.push_back(*b);
    return out;
}

void Model::load_state_dict(const std::vector<Tensor>& state) {
    auto ps = params();
    auto bs = buffers();
    if (state.size() != ps.size() + bs.size())
        throw FormatError("state dict entry count mismatch");
    size_t i = 0;
    for (Param* p : ps) {
        if (Tensor::count(p->value.shape) != state[i].numel())
            throw FormatError("state dict shape mismatch at " + p->name);
        p->value.data = state[i++].data;
    }
    for (Tensor* b : bs) {
        if (b->numel() != state[i].numel()) throw FormatError("state dict buffer shape mismatch");
        b->data = state[i++].data;
    }
}

uint64_t Model::state_hash() {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const Tensor& t) {
        for (double v : t.data) {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            for (int k = 0; k < 8; ++k) {
                h ^= (bits >> (8 * k)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (Param* p : params()) mix(p->value);
    for (Tensor* b : buffers()) mix(*b);
    return h;
}

// ------------------------------------------------------------------- adam

Adam::Adam(std::vector<Param*> params, double lr, double weight_decay, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    for (Param* p : params_) {
        m_.emplace_back(p->value.data.size(), 0.0);
        v_.emplace_back(p->value.data.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, double(t_));
    const double bc2 = 1.0 - std::pow(b2_, double(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Param* p = params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            double g = p->grad.data[i] + wd_ * p->value.data[i];
            m[i] = b1_ * m[i] + (1 - b1_) * g;
            v[i] = b2_ * v[i] + (1 - b2_) * g * g;
            const double mh = m[i] / bc1, vh = v[i] / bc2;
            p->value.data[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

} // namespace eegkd::nn
