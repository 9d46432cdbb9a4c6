#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "eegkd/data.hpp"
#include "eegkd/rng.hpp"

namespace testutil {

// unique temp dir per test binary run, removed on destruction
struct TmpDir {
    std::filesystem::path path;
    explicit TmpDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("eegkd_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str(const std::string& rel = "") const {
        return rel.empty() ? path.string() : (path / rel).string();
    }
};

// Class-separable synthetic dataset: class k gets a k-dependent sinusoid
// plus noise, so tiny models can learn it quickly.
inline eegkd::EpochedDataset synthetic_dataset(int n_trials, int n_channels, int n_samples,
                                               int n_classes, uint64_t seed,
                                               const std::string& subject = "SYN",
                                               const std::string& session = "T") {
    eegkd::EpochedDataset d;
    d.n_trials = n_trials;
    d.n_channels = n_channels;
    d.n_samples = n_samples;
    d.n_classes = n_classes;
    d.fs = 128.0;
    d.subject_id = subject;
    d.session_id = session;
    for (int c = 0; c < n_channels; ++c) d.channel_names.push_back("ch" + std::to_string(c));
    eegkd::Rng rng(seed);
    d.data.resize(size_t(n_trials) * n_channels * n_samples);
    for (int t = 0; t < n_trials; ++t) {
        const int label = t % n_classes;
        d.labels.push_back(label);
        const double freq = 6.0 + 4.0 * label;
        const double amp = 1.0 + 0.3 * label;
        for (int c = 0; c < n_channels; ++c)
            for (int s = 0; s < n_samples; ++s) {
                const double phase = 2.0 * 3.14159265358979 * freq * s / d.fs + 0.3 * c;
                const double v = amp * std::sin(phase) + 0.3 * (rng.uniform() - 0.5);
                d.data[(size_t(t) * n_channels + size_t(c)) * size_t(n_samples) + size_t(s)] =
                    float(v);
            }
    }
    return d;
}

} // namespace testutil
