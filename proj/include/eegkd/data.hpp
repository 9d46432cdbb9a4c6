#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "eegkd/tensor.hpp"

namespace eegkd {

// Continuous multi-channel recording in microvolts, [channel][sample].
struct RawRecording {
    std::vector<float> signal;
    int n_channels = 0;
    int64_t n_samples = 0;
    double fs = 0;
    std::vector<std::string> channel_names;
    std::vector<std::pair<int64_t, int>> events; // (onset sample, event code), onsets strictly increasing
    std::string subject_id;
    std::string session_id;

    float sample(int c, int64_t s) const { return signal[size_t(c) * size_t(n_samples) + size_t(s)]; }
    void validate() const;
};

// Epoched trials, [trial][channel][sample], labels in [0, n_classes).
struct EpochedDataset {
    std::vector<float> data;
    int n_trials = 0;
    int n_channels = 0;
    int n_samples = 0;
    std::vector<int> labels;
    int n_classes = 0;
    double fs = 0;
    std::vector<std::string> channel_names;
    std::string subject_id;
    std::string session_id;

    const float* trial(int t) const { return data.data() + size_t(t) * size_t(n_channels) * size_t(n_samples); }
    std::vector<int> class_counts() const;
    void validate() const;
};

// Ordered channel subset of a parent montage. parent_indices is empty for a
// root montage and otherwise strictly increasing (order-preserving).
struct Montage {
    std::string name;
    std::vector<std::string> channels;
    std::vector<int> parent_indices;

    static Montage root(std::string name, std::vector<std::string> channels);
    // Derive from a parent channel list; channel order must follow the parent.
    static Montage subset(std::string name, const std::vector<std::string>& parent,
                          std::vector<std::string> channels);
};

// One channel name per line, '#' comments. Name defaults to the file stem.
Montage load_montage(const std::string& path, const std::vector<std::string>& parent = {});
void save_montage(const Montage& m, const std::string& path);

using Container = std::variant<RawRecording, EpochedDataset>;

// Canonical container: UTF-8 key/value header file plus a little-endian
// float32 payload file ("<header>.dat" unless the header names one).
Container load_container(const std::string& path);
void save_container(const RawRecording& r, const std::string& path);
void save_container(const EpochedDataset& d, const std::string& path);

EpochedDataset load_epoched(const std::string& path);
RawRecording load_raw(const std::string& path);

// Cut one trial per mapped event; trials ordered by onset.
EpochedDataset epoch(const RawRecording& rec, double window_start_s, double window_len_s,
                     const std::map<int, int>& class_map);

// Restrict and reorder channels to m.channels.
EpochedDataset select_montage(const EpochedDataset& d, const Montage& m);
RawRecording select_montage(const RawRecording& r, const Montage& m);

// Class-balanced validation split; val gets floor(frac*n/K) trials per class.
// Both halves keep the original trial order. Pure function of the seed.
std::pair<EpochedDataset, EpochedDataset> split_train_val(const EpochedDataset& d, double frac,
                                                          uint64_t seed);

// Trials from several sessions/subjects stacked (matching channels, fs, classes).
EpochedDataset concat_datasets(const std::vector<const EpochedDataset*>& parts);

// Teacher/student views of the same trials, in the same order.
struct PairedBatch {
    Tensor x_teacher; // N x 1 x C_hd x T
    Tensor x_student; // N x 1 x C_ld x T
    std::vector<int> y;
    std::vector<int> trial_indices;
};

// One shuffled pass over the dataset; the final short batch is kept.
class PairedBatchStream {
public:
    PairedBatchStream(const EpochedDataset& d_hd, const Montage& m_student, int batch_size,
                      uint64_t shuffle_seed);
    std::optional<PairedBatch> next();
    int n_batches() const;
    void reset();

private:
    const EpochedDataset& d_;
    std::vector<int> student_cols_;
    int batch_size_;
    std::vector<int> order_;
    size_t pos_ = 0;
};

// Trials as a network input tensor (N x 1 x C x T), doubles.
Tensor trials_to_input(const EpochedDataset& d, const std::vector<int>& indices);

} // namespace eegkd
