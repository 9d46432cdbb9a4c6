#pragma once

#include <map>
#include <memory>
#include <string>

#include "eegkd/nn.hpp"
#include "eegkd/tensor.hpp"

namespace eegkd::models {

enum class Arch { SCCNet, EEGNet, ShallowConvNet };

Arch arch_from_string(const std::string& s);
std::string to_string(Arch a);

struct ArchitectureSpec {
    Arch arch = Arch::SCCNet;
    int n_channels = 22;
    int n_samples = 512;
    int n_classes = 4;

    std::string display_name() const; // e.g. "SCCNet-22"
    void validate() const;
};

// Named intermediate activations captured during one forward pass.
// LF1/LF2/LF3 follow the upstream/midstream/downstream tap placement:
//   SCCNet:         spatial        / spatial-temporal / power
//   EEGNet:         temporal       / temporal-spatial / temporal-spatial
//   ShallowConvNet: temporal       / temporal-spatial / power
struct TapSet {
    Tensor lf1, lf2, lf3;
    Tensor logits;

    const Tensor& tap(const std::string& name) const;
    Tensor& tap(const std::string& name);
};

struct Model {
    ArchitectureSpec spec;
    uint64_t init_seed = 0;
    nn::Model net;

    TapSet forward_with_taps(const Tensor& x, nn::Mode mode);
    Tensor forward(const Tensor& x, nn::Mode mode) { return net.forward(x, mode); }
    int64_t count_parameters() { return net.count_parameters(); }
};

// Deterministic build + init. Throws BuildError when n_samples is too short
// for the architecture's kernel/pool chain (the message names the minimum).
std::unique_ptr<Model> build_model(const ArchitectureSpec& spec, uint64_t init_seed);

// Minimum input length accepted by build_model for this architecture.
int min_samples(Arch a);

// Opaque parameter blob + human-diffable manifest ("<path>.manifest").
void save_checkpoint(Model& model, const std::string& path,
                     const std::map<std::string, std::string>& manifest_extra = {});
std::unique_ptr<Model> load_checkpoint(const std::string& path);

} // namespace eegkd::models
