#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eegkd/data.hpp"
#include "eegkd/distill.hpp"
#include "eegkd/models.hpp"

namespace eegkd::training {

struct TrainConfig {
    int epochs = 500;
    double learning_rate = 5e-4;
    double weight_decay = 0.1;
    int batch_size = 128;
    double val_fraction = 0.125;
    uint64_t seed = 0;
    models::ArchitectureSpec arch;
    std::string montage_name;
    std::optional<distill::DistillConfig> distill;
    // checkpoint-selection objective on the validation split: the full
    // training objective (default) or plain cross entropy
    bool val_uses_total_objective = true;

    void validate() const;
    std::string digest() const;
};

enum class Role { Teacher, StudentBaseline, StudentDistilled };
std::string to_string(Role r);

struct RunRecord {
    std::string run_id;
    std::string config_digest;
    uint64_t seed = 0;
    Role role = Role::Teacher;
    std::string teacher_run_id;                // present iff role == StudentDistilled
    std::optional<double> test_accuracy;       // percent
    double best_val_loss = 0;
    int best_epoch = -1;
    double wall_time_s = 0;
    bool aborted = false;
    std::string diagnostic;
    std::string subject_id, session_id, arch_name, montage;

    // all scientific fields; wall time excluded
    bool equivalent(const RunRecord& o) const;
};

struct EpochLogRow {
    int epoch;
    double train_ce, train_kl, train_sk, train_total;
    double val_loss, val_acc;
};

struct TrainOutcome {
    std::unique_ptr<models::Model> model;
    RunRecord record;
    std::vector<EpochLogRow> log;
};

// Cross-entropy training on the full montage; checkpoint at the epoch of
// minimum validation loss.
TrainOutcome pretrain_teacher(const EpochedDataset& train, const EpochedDataset* test,
                              const TrainConfig& cfg);

// Student training on the montage-restricted view of the same trials. The
// teacher (frozen, eval mode) sees the full-montage rows of each mini-batch.
// teacher == nullptr is allowed when the config needs none (beta == 0 and no
// logits loss), which is exactly the baseline run.
TrainOutcome distill_student(const EpochedDataset& train_hd, const Montage& m_student,
                             models::Model* teacher, const EpochedDataset* test_hd,
                             const TrainConfig& cfg, const std::string& teacher_run_id = "");

TrainOutcome train_student_baseline(const EpochedDataset& train_hd, const Montage& m_student,
                                    const EpochedDataset* test_hd, TrainConfig cfg);

// Argmax accuracy in percent; ties resolve to the lowest class index.
double evaluate(models::Model& model, const EpochedDataset& test);

void write_epoch_log(const std::string& path, const std::vector<EpochLogRow>& rows);

} // namespace eegkd::training
