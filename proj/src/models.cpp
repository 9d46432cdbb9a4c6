#include "eegkd/models.hpp"

#include <cstring>
#include <fstream>

#include "eegkd/errors.hpp"

namespace eegkd::models {

Arch arch_from_string(const std::string& s) {
    if (s == "SCCNet" || s == "sccnet") return Arch::SCCNet;
    if (s == "EEGNet" || s == "eegnet") return Arch::EEGNet;
    if (s == "ShallowConvNet" || s == "shallowconvnet" || s == "shallow") return Arch::ShallowConvNet;
    throw ConfigError("unknown architecture '" + s + "'");
}

std::string to_string(Arch a) {
    switch (a) {
        case Arch::SCCNet: return "SCCNet";
        case Arch::EEGNet: return "EEGNet";
        case Arch::ShallowConvNet: return "ShallowConvNet";
    }
    return "?";
}

std::string ArchitectureSpec::display_name() const {
    return to_string(arch) + "-" + std::to_string(n_channels);
}

void ArchitectureSpec::validate() const {
    if (n_channels < 1) throw BuildError("spec: n_channels must be >= 1");
    if (n_classes < 2) throw BuildError("spec: n_classes must be >= 2");
    const int need = min_samples(arch);
    if (n_samples < need)
        throw BuildError("spec: " + to_string(arch) + " needs n_samples >= " + std::to_string(need) +
                         ", got " + std::to_string(n_samples));
}

const Tensor& TapSet::tap(const std::string& name) const {
    if (name == "LF1") return lf1;
    if (name == "LF2") return lf2;
    if (name == "LF3") return lf3;
    throw ArgumentError("unknown tap " + name);
}

Tensor& TapSet::tap(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const TapSet*>(this)->tap(name));
}

TapSet Model::forward_with_taps(const Tensor& x, nn::Mode mode) {
    std::map<std::string, Tensor> taps;
    TapSet out;
    out.logits = net.forward(x, mode, &taps);
    out.lf1 = std::move(taps.at("LF1"));
    out.lf2 = std::move(taps.at("LF2"));
    out.lf3 = std::move(taps.at("LF3"));
    return out;
}

namespace {

// SCCNet constants at 128 Hz: spatial filters = n_channels, then 20
// spatio-temporal filters over a 12-sample (~0.1 s) kernel, squared,
// averaged over 64 samples (0.5 s) with stride 12, log power.
constexpr int kSccTemporalKernel = 12;
constexpr int kSccStFilters = 20;
constexpr int kSccPool = 64;
constexpr int kSccPoolStride = 12;

// EEGNet-8,2 at 128 Hz.
constexpr int kEegF1 = 8;
constexpr int kEegD = 2;
constexpr int kEegF2 = 16;
constexpr int kEegTemporalKernel = 64;
constexpr int kEegSepKernel = 16;
constexpr int kEegPool1 = 4;
constexpr int kEegPool2 = 8;

// ShallowConvNet rescaled to 128 Hz: 13-sample temporal kernel (~0.1 s),
// 38-sample pool (0.3 s) with stride 8 (~0.06 s).
constexpr int kShallowFilters = 40;
constexpr int kShallowTemporalKernel = 13;
constexpr int kShallowPool = 38;
constexpr int kShallowPoolStride = 8;

void build_sccnet(nn::Model& net, const ArchitectureSpec& s) {
    const int nu = s.n_channels;
    net.add(std::unique_ptr<nn::Layer>(
        new nn::Conv2d("conv_spatial", 1, nu, s.n_channels, 1, 0, 0, 0, 0)));
    net.add(std::make_unique<nn::BatchNorm2d>("bn_spatial", nu));
    net.mark_tap("LF1"); // (nu, 1, T)
    net.add(std::make_unique<nn::Reshape>("as_image", std::vector<int>{-1, 1, nu, s.n_samples}));
    net.add(std::unique_ptr<nn::Layer>(
        new nn::Conv2d("conv_spatiotemporal", 1, kSccStFilters, nu, kSccTemporalKernel, 0, 0, 0, 0)));
    net.add(std::make_unique<nn::BatchNorm2d>("bn_spatiotemporal", kSccStFilters));
    net.mark_tap("LF2"); // (20, 1, T-11)
    net.add(std::make_unique<nn::Square>("square"));
    net.add(std::make_unique<nn::Dropout>("dropout", 0.5, net.dropout_rng()));
    net.add(std::make_unique<nn::AvgPool2d>("pool", 1, kSccPool, 1, kSccPoolStride));
    net.add(std::make_unique<nn::SafeLog>("log"));
    net.mark_tap("LF3"); // (20, 1, T'')
    const int tw = s.n_samples - kSccTemporalKernel + 1;
    const int to = (tw - kSccPool) / kSccPoolStride + 1;
    net.add(std::make_unique<nn::Reshape>("flatten", std::vector<int>{-1, kSccStFilters * to}));
    net.add(std::make_unique<nn::Linear>("fc", kSccStFilters * to, s.n_classes));
}

void build_eegnet(nn::Model& net, const ArchitectureSpec& s) {
    net.add(std::unique_ptr<nn::Layer>(
        nn::Conv2d::same_width("conv_temporal", 1, kEegF1, 1, kEegTemporalKernel, 1, false)));
    net.add(std::make_unique<nn::BatchNorm2d>("bn1", kEegF1));
    net.mark_tap("LF1"); // (F1, C, T)
    net.add(std::unique_ptr<nn::Layer>(new nn::Conv2d("conv_depthwise", kEegF1, kEegF1 * kEegD,
                                                      s.n_channels, 1, 0, 0, 0, 0, kEegF1, false)));
    net.add(std::make_unique<nn::BatchNorm2d>("bn2", kEegF1 * kEegD));
    net.add(std::make_unique<nn::Elu>("elu1"));
    net.add(std::make_unique<nn::AvgPool2d>("pool1", 1, kEegPool1, 1, kEegPool1));
    net.mark_tap("LF2"); // (16, 1, T/4)
    net.add(std::make_unique<nn::Dropout>("dropout1", 0.25, net.dropout_rng()));
    net.add(std::unique_ptr<nn::Layer>(nn::Conv2d::same_width("conv_separable_depth", kEegF1 * kEegD,
                                                              kEegF1 * kEegD, 1, kEegSepKernel,
                                                              kEegF1 * kEegD, false)));
    net.add(std::unique_ptr<nn::Layer>(
        new nn::Conv2d("conv_separable_point", kEegF1 * kEegD, kEegF2, 1, 1, 0, 0, 0, 0, 1, false)));
    net.add(std::make_unique<nn::BatchNorm2d>("bn3", kEegF2));
    net.add(std::make_unique<nn::Elu>("elu2"));
    net.add(std::make_unique<nn::AvgPool2d>("pool2", 1, kEegPool2, 1, kEegPool2));
    net.mark_tap("LF3"); // (F2, 1, T/32)
    net.add(std::make_unique<nn::Dropout>("dropout2", 0.5, net.dropout_rng()));
    const int to = s.n_samples / kEegPool1 / kEegPool2;
    net.add(std::make_unique<nn::Reshape>("flatten", std::vector<int>{-1, kEegF2 * to}));
    net.add(std::make_unique<nn::Linear>("fc", kEegF2 * to, s.n_classes));
}

void build_shallow(nn::Model& net, const ArchitectureSpec& s) {
    net.add(std::unique_ptr<nn::Layer>(
        new nn::Conv2d("conv_temporal", 1, kShallowFilters, 1, kShallowTemporalKernel, 0, 0, 0, 0)));
    net.mark_tap("LF1"); // (40, C, T-12)
    net.add(std::unique_ptr<nn::Layer>(new nn::Conv2d("conv_spatial", kShallowFilters,
                                                      kShallowFilters, s.n_channels, 1, 0, 0, 0, 0,
                                                      1, false)));
    net.add(std::make_unique<nn::BatchNorm2d>("bn", kShallowFilters));
    net.mark_tap("LF2"); // (40, 1, T-12)
    net.add(std::make_unique<nn::Square>("square"));
    net.add(std::make_unique<nn::AvgPool2d>("pool", 1, kShallowPool, 1, kShallowPoolStride));
    net.add(std::make_unique<nn::SafeLog>("log"));
    net.mark_tap("LF3"); // (40, 1, T'')
    net.add(std::make_unique<nn::Dropout>("dropout", 0.5, net.dropout_rng()));
    const int tw = s.n_samples - kShallowTemporalKernel + 1;
    const int to = (tw - kShallowPool) / kShallowPoolStride + 1;
    net.add(std::make_unique<nn::Reshape>("flatten", std::vector<int>{-1, kShallowFilters * to}));
    net.add(std::make_unique<nn::Linear>("fc", kShallowFilters * to, s.n_classes));
}

} // namespace

int min_samples(Arch a) {
    switch (a) {
        case Arch::SCCNet: return kSccTemporalKernel - 1 + kSccPool;           // 75
        case Arch::EEGNet: return kEegPool1 * kEegPool2;                       // 32
        case Arch::ShallowConvNet: return kShallowTemporalKernel - 1 + kShallowPool; // 50
    }
    return 1;
}

std::unique_ptr<Model> build_model(const ArchitectureSpec& spec, uint64_t init_seed) {
    spec.validate();
    auto m = std::make_unique<Model>();
    m->spec = spec;
    m->init_seed = init_seed;
    switch (spec.arch) {
        case Arch::SCCNet: build_sccnet(m->net, spec); break;
        case Arch::EEGNet: build_eegnet(m->net, spec); break;
        case Arch::ShallowConvNet: build_shallow(m->net, spec); break;
    }
    m->net.init_params(init_seed);
    return m;
}

namespace {
constexpr char kCkptMagic[8] = {'E', 'K', 'D', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(Model& model, const std::string& path,
                     const std::map<std::string, std::string>& manifest_extra) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path);
    out.write(kCkptMagic, 8);
    auto put_i32 = [&](int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u64 = [&](uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    put_i32(int32_t(model.spec.arch));
    put_i32(model.spec.n_channels);
    put_i32(model.spec.n_samples);
    put_i32(model.spec.n_classes);
    put_u64(model.init_seed);
    const auto state = model.net.state_dict();
    put_i32(int32_t(state.size()));
    for (const Tensor& t : state) {
        put_i32(int32_t(t.shape.size()));
        for (int d : t.shape) put_i32(d);
        out.write(reinterpret_cast<const char*>(t.data.data()), int64_t(t.data.size()) * 8);
    }
    if (!out) throw FormatError("short write on checkpoint " + path);

    std::ofstream mf(path + ".manifest", std::ios::trunc);
    mf << "arch=" << to_string(model.spec.arch) << "\n";
    mf << "n_channels=" << model.spec.n_channels << "\n";
    mf << "n_samples=" << model.spec.n_samples << "\n";
    mf << "n_classes=" << model.spec.n_classes << "\n";
    mf << "init_seed=" << model.init_seed << "\n";
    mf << "parameters=" << model.count_parameters() << "\n";
    for (const auto& [k, v] : manifest_extra) mf << k << "=" << v << "\n";
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw FormatError("checkpoint " + path + ": bad magic");
    auto get_i32 = [&] {
        int32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_u64 = [&] {
        uint64_t v;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    ArchitectureSpec spec;
    spec.arch = Arch(get_i32());
    spec.n_channels = get_i32();
    spec.n_samples = get_i32();
    spec.n_classes = get_i32();
    const uint64_t seed = get_u64();
    auto model = build_model(spec, seed);
    const int n_tensors = get_i32();
    std::vector<Tensor> state;
    for (int i = 0; i < n_tensors; ++i) {
        const int nd = get_i32();
        std::vector<int> shape(size_t(nd), 0);
        for (int& d : shape) d = get_i32();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()), int64_t(t.data.size()) * 8);
        state.push_back(std::move(t));
    }
    if (!in) throw FormatError("checkpoint " + path + ": truncated");
    model->net.load_state_dict(state);
    return model;
}

} // namespace eegkd::models
