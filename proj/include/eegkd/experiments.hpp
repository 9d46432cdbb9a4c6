#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "eegkd/config.hpp"
#include "eegkd/data.hpp"
#include "eegkd/stats.hpp"
#include "eegkd/training.hpp"

namespace eegkd::experiments {

extern const std::vector<std::string> kStudies; // valid study.type values

struct Record {
    training::RunRecord run;
    std::map<std::string, std::string> extra; // method, teacher_subject, ...
};

// One plain-text record file per run plus a per-study index; append-only,
// atomic via rename, idempotent on run_id.
class ResultsStore {
public:
    explicit ResultsStore(std::string root);

    const std::string& root() const { return root_; }
    // returns false when the run_id already exists (record kept unchanged)
    bool append(const std::string& study, const Record& rec);
    std::vector<Record> load(const std::string& study) const;

private:
    std::string root_;
    mutable std::mutex mu_;
};

std::string serialize_record(const Record& rec);
Record parse_record(const std::string& text);

// Greedy backward channel elimination around an injected evaluator.
// The returned order lists every channel, least important first; the last
// survivor is appended at the end. curve[k] is the accuracy of the best
// k-channel subset encountered on the way down (k = n..1).
struct EliminationResult {
    std::vector<std::string> order;
    std::map<int, double> curve; // channel count -> accuracy
};

using SetEvaluator = std::function<double(const std::vector<std::string>&)>;

EliminationResult backward_eliminate(const SetEvaluator& evaluator,
                                     const std::vector<std::string>& channels);

// score[ch] = sum over runs of the number of elimination steps during which
// ch was still present; `normalized` rescales min-max to [0, 1].
struct ImportanceMap {
    std::vector<std::string> channels;
    std::vector<double> raw;
    std::vector<double> normalized;
};

ImportanceMap electrode_importance(const std::vector<EliminationResult>& runs,
                                   const std::vector<std::string>& parent_channels);

// Study runners. Each trains (or reuses) the teachers it needs, appends one
// record per run to the store, and renders the study report.
void run_montage_compare(const config::Config& cfg, ResultsStore& store);
void run_layer_sweep(const config::Config& cfg, ResultsStore& store);
void run_cross_subject(const config::Config& cfg, ResultsStore& store);
void run_ablation(const config::Config& cfg, ResultsStore& store);
void run_elimination(const config::Config& cfg, ResultsStore& store);

// Deterministic CSV tables + PNG figures for a finished (or partial) study.
void report(const ResultsStore& store, const std::string& study);

} // namespace eegkd::experiments
