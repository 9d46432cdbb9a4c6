#include "eegkd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "eegkd/errors.hpp"
#include "eegkd/rng.hpp"

namespace fs = std::filesystem;

namespace eegkd {

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else cur += c;
    }
    if (!cur.empty() || !s.empty()) out.push_back(cur);
    return out;
}

std::string join_list(const std::vector<std::string>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
    }
    return s;
}

void check_unique_channels(const std::vector<std::string>& names) {
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw FormatError("channel_names: empty channel name");
        if (!seen.insert(n).second) throw FormatError("channel_names: duplicate channel name " + n);
    }
}

struct Header {
    std::map<std::string, std::string> kv;
    std::vector<std::string> order;

    void set(const std::string& k, const std::string& v) {
        if (!kv.count(k)) order.push_back(k);
        kv[k] = v;
    }
    const std::string& get(const std::string& k) const {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("container header: missing field " + k);
        return it->second;
    }
    std::optional<std::string> get_opt(const std::string& k) const {
        auto it = kv.find(k);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    }
    int64_t get_int(const std::string& k) const {
        try {
            return std::stoll(get(k));
        } catch (const std::logic_error&) {
            throw FormatError("container header: field " + k + " is not an integer");
        }
    }
    double get_double(const std::string& k) const {
        try {
            return std::stod(get(k));
        } catch (const std::logic_error&) {
            throw FormatError("container header: field " + k + " is not a number");
        }
    }
};

Header read_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open container header " + path);
    Header h;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("container header: malformed line '" + line + "'");
        h.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return h;
}

std::string payload_path(const std::string& header_path, const Header& h) {
    if (auto p = h.get_opt("payload")) return (fs::path(header_path).parent_path() / *p).string();
    return header_path + ".dat";
}

std::vector<float> read_payload(const std::string& path, int64_t expected_count) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open container payload " + path);
    const int64_t bytes = in.tellg();
    if (bytes != expected_count * 4)
        throw FormatError("container payload " + path + ": size is " + std::to_string(bytes) +
                          " bytes, expected " + std::to_string(expected_count * 4));
    in.seekg(0);
    std::vector<float> data(size_t(expected_count), 0.0f);
    in.read(reinterpret_cast<char*>(data.data()), expected_count * 4);
    if (!in) throw FormatError("container payload " + path + ": short read");
    return data;
}

void write_payload(const std::string& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write container payload " + path);
    out.write(reinterpret_cast<const char*>(data.data()), int64_t(data.size()) * 4);
}

std::vector<int> parse_int_list(const std::string& s, const std::string& field) {
    std::vector<int> out;
    if (s.empty()) return out;
    for (const auto& tok : split_list(s)) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::logic_error&) {
            throw FormatError("container header: bad integer in " + field);
        }
    }
    return out;
}

} // namespace

void RawRecording::validate() const {
    if (fs <= 0) throw FormatError("recording: fs must be positive");
    if (int(channel_names.size()) != n_channels)
        throw FormatError("recording: channel_names count does not match channel dimension");
    check_unique_channels(channel_names);
    if (int64_t(signal.size()) != int64_t(n_channels) * n_samples)
        throw FormatError("recording: signal size does not match dimensions");
    int64_t prev = -1;
    for (const auto& [onset, code] : events) {
        if (onset <= prev) throw FormatError("recording: event onsets must be strictly increasing");
        if (onset < 0 || onset >= n_samples) throw FormatError("recording: event onset out of range");
        prev = onset;
    }
}

std::vector<int> EpochedDataset::class_counts() const {
    std::vector<int> counts(size_t(n_classes), 0);
    for (int l : labels) ++counts[size_t(l)];
    return counts;
}

void EpochedDataset::validate() const {
    if (fs <= 0) throw FormatError("dataset: fs must be positive");
    if (int(channel_names.size()) != n_channels)
        throw FormatError("dataset: channel_names count does not match channel dimension");
    check_unique_channels(channel_names);
    if (int(labels.size()) != n_trials) throw FormatError("dataset: labels count does not match n_trials");
    for (int l : labels)
        if (l < 0 || l >= n_classes) throw FormatError("dataset: label out of range [0, n_classes)");
    if (int64_t(data.size()) != int64_t(n_trials) * n_channels * n_samples)
        throw FormatError("dataset: payload size does not match dimensions");
}

Montage Montage::root(std::string name, std::vector<std::string> channels) {
    check_unique_channels(channels);
    Montage m;
    m.name = std::move(name);
    m.channels = std::move(channels);
    return m;
}

Montage Montage::subset(std::string name, const std::vector<std::string>& parent,
                        std::vector<std::string> channels) {
    check_unique_channels(channels);
    Montage m;
    m.name = std::move(name);
    int prev = -1;
    for (const auto& ch : channels) {
        auto it = std::find(parent.begin(), parent.end(), ch);
        if (it == parent.end()) throw MontageError("unknown channel " + ch);
        const int idx = int(it - parent.begin());
        if (idx <= prev)
            throw MontageError("montage " + m.name + ": channel " + ch + " breaks parent order");
        m.parent_indices.push_back(idx);
        prev = idx;
    }
    m.channels = std::move(channels);
    return m;
}

Montage load_montage(const std::string& path, const std::vector<std::string>& parent) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open montage file " + path);
    std::vector<std::string> channels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        auto b = line.find_first_not_of(" \t");
        auto e = line.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        channels.push_back(line.substr(b, e - b + 1));
    }
    const std::string name = fs::path(path).stem().string();
    if (parent.empty()) return Montage::root(name, std::move(channels));
    return Montage::subset(name, parent, std::move(channels));
}

void save_montage(const Montage& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write montage file " + path);
    out << "# montage " << m.name << "\n";
    for (const auto& ch : m.channels) out << ch << "\n";
}

Container load_container(const std::string& path) {
    const Header h = read_header(path);
    const int64_t version = h.get_int("format_version");
    if (version != 1)
        throw FormatError("container header: unknown format_version " + std::to_string(version));
    const std::string kind = h.get("kind");
    const std::string ppath = payload_path(path, h);

    if (kind == "epoched") {
        EpochedDataset d;
        d.subject_id = h.get("subject_id");
        d.session_id = h.get("session_id");
        d.fs = h.get_double("fs");
        d.channel_names = split_list(h.get("channel_names"));
        d.n_channels = int(d.channel_names.size());
        d.n_trials = int(h.get_int("n_trials"));
        d.n_samples = int(h.get_int("n_samples"));
        d.n_classes = int(h.get_int("n_classes"));
        d.labels = parse_int_list(h.get("labels"), "labels");
        d.data = read_payload(ppath, int64_t(d.n_trials) * d.n_channels * d.n_samples);
        d.validate();
        return d;
    }
    if (kind == "raw") {
        RawRecording r;
        r.subject_id = h.get("subject_id");
        r.session_id = h.get("session_id");
        r.fs = h.get_double("fs");
        r.channel_names = split_list(h.get("channel_names"));
        r.n_channels = int(r.channel_names.size());
        r.n_samples = h.get_int("n_samples");
        if (auto ev = h.get_opt("events"); ev && !ev->empty()) {
            for (const auto& tok : split_list(*ev)) {
                auto colon = tok.find(':');
                if (colon == std::string::npos)
                    throw FormatError("container header: malformed events entry '" + tok + "'");
                r.events.emplace_back(std::stoll(tok.substr(0, colon)), std::stoi(tok.substr(colon + 1)));
            }
        }
        r.signal = read_payload(ppath, int64_t(r.n_channels) * r.n_samples);
        r.validate();
        return r;
    }
    throw FormatError("container header: unknown kind '" + kind + "'");
}

EpochedDataset load_epoched(const std::string& path) {
    auto c = load_container(path);
    if (!std::holds_alternative<EpochedDataset>(c))
        throw FormatError("container " + path + " is not an epoched dataset");
    return std::get<EpochedDataset>(std::move(c));
}

RawRecording load_raw(const std::string& path) {
    auto c = load_container(path);
    if (!std::holds_alternative<RawRecording>(c))
        throw FormatError("container " + path + " is not a raw recording");
    return std::get<RawRecording>(std::move(c));
}

namespace {
std::string fs_to_string(double fs) {
    std::ostringstream os;
    os.precision(17);
    os << fs;
    return os.str();
}
} // namespace

void save_container(const RawRecording& r, const std::string& path) {
    r.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write container header " + path);
    out << "format_version=1\nkind=raw\n";
    out << "subject_id=" << r.subject_id << "\nsession_id=" << r.session_id << "\n";
    out << "fs=" << fs_to_string(r.fs) << "\n";
    out << "channel_names=" << join_list(r.channel_names) << "\n";
    out << "n_samples=" << r.n_samples << "\n";
    std::string ev;
    for (size_t i = 0; i < r.events.size(); ++i) {
        if (i) ev += ',';
        ev += std::to_string(r.events[i].first) + ":" + std::to_string(r.events[i].second);
    }
    out << "events=" << ev << "\n";
    write_payload(path + ".dat", r.signal);
}

void save_container(const EpochedDataset& d, const std::string& path) {
    d.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write container header " + path);
    out << "format_version=1\nkind=epoched\n";
    out << "subject_id=" << d.subject_id << "\nsession_id=" << d.session_id << "\n";
    out << "fs=" << fs_to_string(d.fs) << "\n";
    out << "channel_names=" << join_list(d.channel_names) << "\n";
    out << "n_trials=" << d.n_trials << "\nn_samples=" << d.n_samples << "\n";
    out << "n_classes=" << d.n_classes << "\n";
    std::string lab;
    for (size_t i = 0; i < d.labels.size(); ++i) {
        if (i) lab += ',';
        lab += std::to_string(d.labels[i]);
    }
    out << "labels=" << lab << "\n";
    write_payload(path + ".dat", d.data);
}

EpochedDataset epoch(const RawRecording& rec, double window_start_s, double window_len_s,
                     const std::map<int, int>& class_map) {
    rec.validate();
    if (window_len_s <= 0) throw ArgumentError("epoch: window length must be positive");
    const int n_samples = int(std::llround(window_len_s * rec.fs));
    const int64_t offset = std::llround(window_start_s * rec.fs);

    EpochedDataset d;
    d.fs = rec.fs;
    d.channel_names = rec.channel_names;
    d.n_channels = rec.n_channels;
    d.n_samples = n_samples;
    d.subject_id = rec.subject_id;
    d.session_id = rec.session_id;
    int n_classes = 0;
    for (const auto& [code, label] : class_map) n_classes = std::max(n_classes, label + 1);
    d.n_classes = n_classes;

    size_t event_index = 0;
    for (const auto& [onset, code] : rec.events) {
        auto it = class_map.find(code);
        if (it != class_map.end()) {
            const int64_t start = onset + offset;
            if (start < 0 || start + n_samples > rec.n_samples)
                throw EpochError("epoch: event " + std::to_string(event_index) +
                                 " window exceeds signal bounds");
            for (int c = 0; c < rec.n_channels; ++c) {
                const float* src = rec.signal.data() + size_t(c) * size_t(rec.n_samples) + size_t(start);
                d.data.insert(d.data.end(), src, src + n_samples);
            }
            d.labels.push_back(it->second);
        }
        ++event_index;
    }
    d.n_trials = int(d.labels.size());
    d.validate();
    return d;
}

EpochedDataset select_montage(const EpochedDataset& d, const Montage& m) {
    std::vector<int> cols;
    for (const auto& ch : m.channels) {
        auto it = std::find(d.channel_names.begin(), d.channel_names.end(), ch);
        if (it == d.channel_names.end()) throw MontageError("unknown channel " + ch);
        cols.push_back(int(it - d.channel_names.begin()));
    }
    EpochedDataset out;
    out.n_trials = d.n_trials;
    out.n_channels = int(cols.size());
    out.n_samples = d.n_samples;
    out.labels = d.labels;
    out.n_classes = d.n_classes;
    out.fs = d.fs;
    out.channel_names = m.channels;
    out.subject_id = d.subject_id;
    out.session_id = d.session_id;
    out.data.resize(size_t(out.n_trials) * size_t(out.n_channels) * size_t(out.n_samples));
    for (int t = 0; t < d.n_trials; ++t)
        for (size_t k = 0; k < cols.size(); ++k) {
            const float* src = d.trial(t) + size_t(cols[k]) * size_t(d.n_samples);
            float* dst = out.data.data() +
                         (size_t(t) * size_t(out.n_channels) + k) * size_t(out.n_samples);
            std::copy(src, src + d.n_samples, dst);
        }
    return out;
}

RawRecording select_montage(const RawRecording& r, const Montage& m) {
    std::vector<int> cols;
    for (const auto& ch : m.channels) {
        auto it = std::find(r.channel_names.begin(), r.channel_names.end(), ch);
        if (it == r.channel_names.end()) throw MontageError("unknown channel " + ch);
        cols.push_back(int(it - r.channel_names.begin()));
    }
    RawRecording out;
    out.n_channels = int(cols.size());
    out.n_samples = r.n_samples;
    out.fs = r.fs;
    out.channel_names = m.channels;
    out.events = r.events;
    out.subject_id = r.subject_id;
    out.session_id = r.session_id;
    out.signal.resize(size_t(out.n_channels) * size_t(out.n_samples));
    for (size_t k = 0; k < cols.size(); ++k)
        std::copy(r.signal.begin() + int64_t(cols[k]) * r.n_samples,
                  r.signal.begin() + int64_t(cols[k] + 1) * r.n_samples,
                  out.signal.begin() + int64_t(k) * out.n_samples);
    return out;
}

std::pair<EpochedDataset, EpochedDataset> split_train_val(const EpochedDataset& d, double frac,
                                                          uint64_t seed) {
    d.validate();
    if (frac < 0 || frac >= 1) throw SplitError("split: fraction must be in [0, 1)");
    const auto counts = d.class_counts();
    for (int k = 0; k < d.n_classes; ++k)
        if (counts[size_t(k)] == 0)
            throw SplitError("split: class " + std::to_string(k) + " has zero trials");

    auto take = [&](const std::vector<int>& idx) {
        EpochedDataset out;
        out.n_trials = int(idx.size());
        out.n_channels = d.n_channels;
        out.n_samples = d.n_samples;
        out.n_classes = d.n_classes;
        out.fs = d.fs;
        out.channel_names = d.channel_names;
        out.subject_id = d.subject_id;
        out.session_id = d.session_id;
        const size_t stride = size_t(d.n_channels) * size_t(d.n_samples);
        out.data.reserve(idx.size() * stride);
        for (int t : idx) {
            out.labels.push_back(d.labels[size_t(t)]);
            out.data.insert(out.data.end(), d.trial(t), d.trial(t) + stride);
        }
        return out;
    };

    if (frac == 0) {
        EpochedDataset val = take({});
        return {d, val};
    }

    const int per_class = int(frac * double(d.n_trials) / double(d.n_classes));
    std::vector<char> in_val(size_t(d.n_trials), 0);
    Rng rng(derive_seed(seed, "train-val-split"));
    for (int k = 0; k < d.n_classes; ++k) {
        std::vector<int> members;
        for (int t = 0; t < d.n_trials; ++t)
            if (d.labels[size_t(t)] == k) members.push_back(t);
        if (int(members.size()) < per_class)
            throw SplitError("split: class " + std::to_string(k) + " has too few trials");
        rng.shuffle(members);
        for (int i = 0; i < per_class; ++i) in_val[size_t(members[size_t(i)])] = 1;
    }
    std::vector<int> train_idx, val_idx;
    for (int t = 0; t < d.n_trials; ++t) (in_val[size_t(t)] ? val_idx : train_idx).push_back(t);
    return {take(train_idx), take(val_idx)};
}

EpochedDataset concat_datasets(const std::vector<const EpochedDataset*>& parts) {
    if (parts.empty()) throw ArgumentError("concat: no datasets");
    EpochedDataset out = *parts.front();
    for (size_t i = 1; i < parts.size(); ++i) {
        const EpochedDataset& p = *parts[i];
        if (p.channel_names != out.channel_names || p.n_samples != out.n_samples ||
            p.fs != out.fs || p.n_classes != out.n_classes)
            throw ArgumentError("concat: incompatible datasets");
        out.data.insert(out.data.end(), p.data.begin(), p.data.end());
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
        out.n_trials += p.n_trials;
    }
    out.subject_id = "multi";
    return out;
}

Tensor trials_to_input(const EpochedDataset& d, const std::vector<int>& indices) {
    Tensor x({int(indices.size()), 1, d.n_channels, d.n_samples});
    double* dst = x.ptr();
    const size_t stride = size_t(d.n_channels) * size_t(d.n_samples);
    for (int t : indices) {
        const float* src = d.trial(t);
        for (size_t i = 0; i < stride; ++i) *dst++ = double(src[i]);
    }
    return x;
}

PairedBatchStream::PairedBatchStream(const EpochedDataset& d_hd, const Montage& m_student,
                                     int batch_size, uint64_t shuffle_seed)
    : d_(d_hd), batch_size_(batch_size) {
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    for (const auto& ch : m_student.channels) {
        auto it = std::find(d_.channel_names.begin(), d_.channel_names.end(), ch);
        if (it == d_.channel_names.end()) throw MontageError("unknown channel " + ch);
        student_cols_.push_back(int(it - d_.channel_names.begin()));
    }
    order_.resize(size_t(d_.n_trials));
    for (int t = 0; t < d_.n_trials; ++t) order_[size_t(t)] = t;
    Rng rng(derive_seed(shuffle_seed, "batch-shuffle"));
    rng.shuffle(order_);
}

int PairedBatchStream::n_batches() const {
    return int((order_.size() + size_t(batch_size_) - 1) / size_t(batch_size_));
}

void PairedBatchStream::reset() { pos_ = 0; }

std::optional<PairedBatch> PairedBatchStream::next() {
    if (pos_ >= order_.size()) return std::nullopt;
    const size_t end = std::min(pos_ + size_t(batch_size_), order_.size());
    std::vector<int> idx(order_.begin() + long(pos_), order_.begin() + long(end));
    pos_ = end;

    PairedBatch b;
    b.trial_indices = idx;
    b.x_teacher = trials_to_input(d_, idx);
    b.x_student = Tensor({int(idx.size()), 1, int(student_cols_.size()), d_.n_samples});
    for (size_t n = 0; n < idx.size(); ++n)
        for (size_t k = 0; k < student_cols_.size(); ++k)
            for (int s = 0; s < d_.n_samples; ++s)
                b.x_student.at(int(n), 0, int(k), s) = b.x_teacher.at(int(n), 0, student_cols_[k], s);
    for (int t : idx) b.y.push_back(d_.labels[size_t(t)]);
    return b;
}

} // namespace eegkd
