#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "eegkd/rng.hpp"
#include "eegkd/tensor.hpp"

namespace eegkd::nn {

enum class Mode { Train, Eval };

struct Param {
    Tensor value;
    Tensor grad;
    std::string name;

    explicit Param(std::string n, std::vector<int> shape) : value(shape), grad(shape), name(std::move(n)) {}
    void zero_grad() { grad.fill(0.0); }
};

// A layer owns its parameters and caches whatever its backward pass needs
// from the most recent Train-mode forward.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    // non-trainable persistent state (batchnorm running stats)
    virtual std::vector<Tensor*> buffers() { return {}; }
    virtual std::string name() const = 0;
    virtual void init(Rng&) {}
};

class Conv2d : public Layer {
public:
    // Explicit asymmetric padding; groups == in_channels gives a depthwise conv.
    Conv2d(std::string name, int in_ch, int out_ch, int kh, int kw, int pad_top, int pad_bottom,
           int pad_left, int pad_right, int groups = 1, bool bias = true);
    static Conv2d* same_width(std::string name, int in_ch, int out_ch, int kh, int kw,
                              int groups = 1, bool bias = true);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override;
    std::string name() const override { return name_; }
    void init(Rng& rng) override;

    int out_channels() const { return out_ch_; }

private:
    std::string name_;
    int in_ch_, out_ch_, kh_, kw_, pt_, pb_, pl_, pr_, groups_;
    bool has_bias_;
    Param weight_; // (out_ch, in_ch/groups, kh, kw)
    Param bias_;   // (out_ch)
    Tensor cached_x_;
};

class BatchNorm2d : public Layer {
public:
    BatchNorm2d(std::string name, int channels, double eps = 1e-5, double momentum = 0.1);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override;
    std::vector<Tensor*> buffers() override;
    std::string name() const override { return name_; }
    void init(Rng&) override;

private:
    std::string name_;
    int ch_;
    double eps_, momentum_;
    Param gamma_, beta_;
    Tensor running_mean_, running_var_;
    // caches
    Tensor cached_xhat_;
    std::vector<double> cached_invstd_, cached_scale_;
    bool cached_train_ = false;
    int64_t cached_count_ = 0;
};

class Elu : public Layer {
public:
    explicit Elu(std::string name, double alpha = 1.0) : name_(std::move(name)), alpha_(alpha) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    double alpha_;
    Tensor cached_y_;
};

class Square : public Layer {
public:
    explicit Square(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    Tensor cached_x_;
};

// log(max(x, floor)); keeps the power features finite early in training
class SafeLog : public Layer {
public:
    explicit SafeLog(std::string name, double floor = 1e-6) : name_(std::move(name)), floor_(floor) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    double floor_;
    Tensor cached_x_;
};

class AvgPool2d : public Layer {
public:
    AvgPool2d(std::string name, int kh, int kw, int sh, int sw);
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    int kh_, kw_, sh_, sw_;
    std::vector<int> cached_in_shape_;
};

class Dropout : public Layer {
public:
    Dropout(std::string name, double p, Rng* rng) : name_(std::move(name)), p_(p), rng_(rng) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    double p_;
    Rng* rng_;
    std::vector<double> mask_;
};

class Reshape : public Layer {
public:
    // -1 in the target shape takes the batch dimension of the input
    Reshape(std::string name, std::vector<int> target) : name_(std::move(name)), target_(std::move(target)) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    std::vector<int> target_;
    std::vector<int> cached_in_shape_;
};

class Linear : public Layer {
public:
    Linear(std::string name, int in_features, int out_features);
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override;
    std::string name() const override { return name_; }
    void init(Rng& rng) override;

private:
    std::string name_;
    int in_f_, out_f_;
    Param weight_, bias_;
    Tensor cached_x_;
};

// A feed-forward stack with named taps (tap value = output of layer i).
class Model {
public:
    Model() : dropout_rng_(0) {}

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    void mark_tap(const std::string& tap_name) { taps_[tap_name] = int(layers_.size()) - 1; }

    // deterministic parameter init + dropout stream seed
    void init_params(uint64_t seed);
    void reseed_dropout(uint64_t seed) { dropout_rng_ = Rng(seed); }
    Rng* dropout_rng() { return &dropout_rng_; }

    // Plain pass; activations are cached inside layers only in Train mode.
    Tensor forward(const Tensor& x, Mode mode);
    // Same pass, also copying out the named tap activations.
    Tensor forward(const Tensor& x, Mode mode, std::map<std::string, Tensor>* taps_out);

    // grad_logits plus optional gradients injected at taps; parameter grads
    // accumulate into Param::grad.
    void backward(const Tensor& grad_logits, const std::map<std::string, Tensor>& tap_grads = {});

    std::vector<Param*> params();
    std::vector<Tensor*> buffers();
    void zero_grad();
    int64_t count_parameters();

    const std::map<std::string, int>& taps() const { return taps_; }
    std::vector<Tensor> state_dict();
    void load_state_dict(const std::vector<Tensor>& state);
    uint64_t state_hash();

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::map<std::string, int> taps_;
    Rng dropout_rng_;
};

class Adam {
public:
    Adam(std::vector<Param*> params, double lr, double weight_decay = 0.0, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);
    void step();

private:
    std::vector<Param*> params_;
    double lr_, wd_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace eegkd::nn
