#include "eegkd/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eegkd/errors.hpp"
#include "eegkd/rng.hpp"

namespace eegkd::training {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (learning_rate <= 0) throw ConfigError("train: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (val_fraction < 0 || val_fraction >= 1)
        throw ConfigError("train: val_fraction must be in [0, 1)");
    if (distill) distill->validate();
}

std::string TrainConfig::digest() const {
    std::ostringstream os;
    os.precision(17);
    os << "epochs=" << epochs << ";lr=" << learning_rate << ";wd=" << weight_decay
       << ";batch=" << batch_size << ";val=" << val_fraction << ";arch="
       << models::to_string(arch.arch) << ";ch=" << arch.n_channels << ";t=" << arch.n_samples
       << ";k=" << arch.n_classes << ";montage=" << montage_name
       << ";val_total=" << val_uses_total_objective;
    if (distill) {
        os << ";beta=" << distill->beta << ";alpha=" << distill->alpha
           << ";T=" << distill->temperature << ";crit=" << distill::to_string(distill->criterion)
           << ";centered=" << distill->centered
           << ";scope=" << (distill->centering_scope == distill::CenteringScope::Batch ? "batch" : "sample")
           << ";logits=" << distill->use_logits_loss << ";pairs=";
        for (const auto& [t, s] : distill->layer_pairs) os << t << ":" << s << ",";
    }
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a(os.str()));
    return buf;
}

std::string to_string(Role r) {
    switch (r) {
        case Role::Teacher: return "teacher";
        case Role::StudentBaseline: return "student-baseline";
        case Role::StudentDistilled: return "student-distilled";
    }
    return "?";
}

bool RunRecord::equivalent(const RunRecord& o) const {
    return run_id == o.run_id && config_digest == o.config_digest && seed == o.seed &&
           role == o.role && teacher_run_id == o.teacher_run_id &&
           test_accuracy == o.test_accuracy && best_val_loss == o.best_val_loss &&
           best_epoch == o.best_epoch && aborted == o.aborted && subject_id == o.subject_id &&
           arch_name == o.arch_name && montage == o.montage;
}

namespace {

struct ValSet {
    Tensor x_model;    // montage-restricted inputs for the trained model
    Tensor x_teacher;  // full-montage inputs
    std::vector<int> y;
};

ValSet make_val_set(const EpochedDataset& val_hd, const Montage& m) {
    std::vector<int> idx(size_t(val_hd.n_trials));
    for (int i = 0; i < val_hd.n_trials; ++i) idx[size_t(i)] = i;
    ValSet v;
    v.x_teacher = trials_to_input(val_hd, idx);
    v.x_model = trials_to_input(select_montage(val_hd, m), idx);
    v.y = val_hd.labels;
    return v;
}

double batch_accuracy(const Tensor& logits, const std::vector<int>& y) {
    int correct = 0;
    const int N = logits.dim(0), K = logits.dim(1);
    for (int n = 0; n < N; ++n) {
        int best = 0;
        for (int k = 1; k < K; ++k)
            if (logits.at(n, k) > logits.at(n, best)) best = k; // ties keep lowest index
        if (best == y[size_t(n)]) ++correct;
    }
    return 100.0 * correct / N;
}

std::string make_run_id(const TrainConfig& cfg, Role role, const std::string& subject,
                        const std::string& teacher_run_id) {
    std::string key = cfg.digest() + "|" + to_string(role) + "|" + std::to_string(cfg.seed) + "|" +
                      subject + "|" + teacher_run_id;
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a(key));
    return buf;
}

// Shared engine for teacher, baseline and distilled runs. The trained model
// sees the montage-restricted rows; a frozen teacher, when present, sees the
// full-montage rows of the same trials in the same order.
TrainOutcome run_loop(const EpochedDataset& data_hd, const Montage& m_model,
                      models::Model* teacher, const EpochedDataset* test_hd, const TrainConfig& cfg,
                      Role role, const std::string& teacher_run_id = "") {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    distill::DistillConfig dcfg;
    if (cfg.distill) dcfg = *cfg.distill;
    else {
        dcfg.beta = 0;
        dcfg.use_logits_loss = false;
    }
    const bool needs_teacher = dcfg.beta > 0 || dcfg.use_logits_loss;
    if (needs_teacher && !teacher)
        throw ConfigError("distillation config requires a teacher checkpoint");
    if (teacher && teacher->spec.n_channels != data_hd.n_channels)
        throw ConfigError("teacher expects " + std::to_string(teacher->spec.n_channels) +
                          " channels, data has " + std::to_string(data_hd.n_channels));

    auto [train_hd, val_hd] = split_train_val(data_hd, cfg.val_fraction, cfg.seed);
    if (train_hd.n_trials == 0) throw ConfigError("training split is empty");

    auto model = models::build_model(cfg.arch, derive_seed(cfg.seed, "init"));
    model->net.reseed_dropout(derive_seed(cfg.seed, "dropout"));
    nn::Adam opt(model->net.params(), cfg.learning_rate, cfg.weight_decay);

    TrainOutcome out;
    out.record.config_digest = cfg.digest();
    out.record.seed = cfg.seed;
    out.record.role = role;
    out.record.teacher_run_id = role == Role::StudentDistilled ? teacher_run_id : "";
    out.record.subject_id = data_hd.subject_id;
    out.record.session_id = data_hd.session_id;
    out.record.arch_name = cfg.arch.display_name();
    out.record.montage = cfg.montage_name.empty() ? m_model.name : cfg.montage_name;

    const bool has_val = val_hd.n_trials > 0;
    ValSet val;
    if (has_val) val = make_val_set(val_hd, m_model);

    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    std::vector<Tensor> best_state;

    for (int e = 0; e < cfg.epochs; ++e) {
        PairedBatchStream stream(train_hd, m_model, cfg.batch_size,
                                 derive_seed(cfg.seed, "epoch-order", uint64_t(e)));
        double ep_ce = 0, ep_kl = 0, ep_sk = 0, ep_total = 0;
        int64_t seen = 0;
        while (auto b = stream.next()) {
            models::TapSet t_taps;
            if (needs_teacher) t_taps = teacher->forward_with_taps(b->x_teacher, nn::Mode::Eval);

            models::TapSet s_taps = model->forward_with_taps(b->x_student, nn::Mode::Train);

            distill::BatchOutputs bo;
            bo.teacher = needs_teacher ? &t_taps : nullptr;
            bo.student = &s_taps;
            bo.y = b->y;

            Tensor grad_logits;
            distill::TapGrads tap_grads;
            const auto loss = distill::total_loss(bo, dcfg, &grad_logits, &tap_grads);
            if (!std::isfinite(loss.total)) {
                out.record.aborted = true;
                out.record.diagnostic = "non-finite training loss at epoch " + std::to_string(e);
                out.record.best_val_loss = best_val;
                out.record.best_epoch = best_epoch;
                out.model = std::move(model);
                out.record.wall_time_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                return out;
            }

            model->net.zero_grad();
            model->net.backward(grad_logits, tap_grads.as_map());
            opt.step();

            const int n = b->x_student.dim(0);
            ep_ce += loss.ce * n;
            ep_kl += loss.kl * n;
            ep_sk += loss.sk * n;
            ep_total += loss.total * n;
            seen += n;
        }

        EpochLogRow row{};
        row.epoch = e;
        row.train_ce = ep_ce / double(seen);
        row.train_kl = ep_kl / double(seen);
        row.train_sk = ep_sk / double(seen);
        row.train_total = ep_total / double(seen);
        row.val_loss = std::numeric_limits<double>::quiet_NaN();
        row.val_acc = std::numeric_limits<double>::quiet_NaN();

        if (has_val) {
            models::TapSet t_taps;
            if (needs_teacher) t_taps = teacher->forward_with_taps(val.x_teacher, nn::Mode::Eval);
            models::TapSet s_taps = model->forward_with_taps(val.x_model, nn::Mode::Eval);
            distill::BatchOutputs bo;
            bo.teacher = needs_teacher ? &t_taps : nullptr;
            bo.student = &s_taps;
            bo.y = val.y;
            double vloss;
            if (cfg.val_uses_total_objective) vloss = distill::total_loss(bo, dcfg).total;
            else vloss = distill::cross_entropy(s_taps.logits, val.y);
            row.val_loss = vloss;
            row.val_acc = batch_accuracy(s_taps.logits, val.y);
            if (vloss < best_val) {
                best_val = vloss;
                best_epoch = e;
                best_state = model->net.state_dict();
            }
        }
        out.log.push_back(row);
    }

    if (has_val && best_epoch >= 0) {
        model->net.load_state_dict(best_state);
        out.record.best_val_loss = best_val;
        out.record.best_epoch = best_epoch;
    } else {
        out.record.best_epoch = cfg.epochs - 1;
        out.record.best_val_loss = std::numeric_limits<double>::quiet_NaN();
    }

    if (test_hd) {
        const EpochedDataset test_view =
            m_model.channels == test_hd->channel_names ? *test_hd : select_montage(*test_hd, m_model);
        out.record.test_accuracy = evaluate(*model, test_view);
    }

    out.record.run_id = make_run_id(cfg, role, data_hd.subject_id, out.record.teacher_run_id);
    out.record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.model = std::move(model);
    return out;
}

} // namespace

TrainOutcome pretrain_teacher(const EpochedDataset& train, const EpochedDataset* test,
                              const TrainConfig& cfg) {
    if (cfg.distill) throw ConfigError("teacher pretraining takes no distillation config");
    Montage full = Montage::root("full", train.channel_names);
    return run_loop(train, full, nullptr, test, cfg, Role::Teacher);
}

TrainOutcome distill_student(const EpochedDataset& train_hd, const Montage& m_student,
                             models::Model* teacher, const EpochedDataset* test_hd,
                             const TrainConfig& cfg, const std::string& teacher_run_id) {
    const Role role = (cfg.distill && (cfg.distill->beta > 0 || cfg.distill->use_logits_loss))
                          ? Role::StudentDistilled
                          : Role::StudentBaseline;
    return run_loop(train_hd, m_student, teacher, test_hd, cfg, role, teacher_run_id);
}

TrainOutcome train_student_baseline(const EpochedDataset& train_hd, const Montage& m_student,
                                    const EpochedDataset* test_hd, TrainConfig cfg) {
    cfg.distill.reset();
    return run_loop(train_hd, m_student, nullptr, test_hd, cfg, Role::StudentBaseline);
}

double evaluate(models::Model& model, const EpochedDataset& test) {
    if (model.spec.n_channels != test.n_channels)
        throw EvalError("evaluate: model expects " + std::to_string(model.spec.n_channels) +
                        " channels, test set has " + std::to_string(test.n_channels));
    if (model.spec.n_samples != test.n_samples)
        throw EvalError("evaluate: sample-count mismatch");
    int correct = 0;
    const int chunk = 256;
    for (int start = 0; start < test.n_trials; start += chunk) {
        std::vector<int> idx;
        for (int t = start; t < std::min(start + chunk, test.n_trials); ++t) idx.push_back(t);
        const Tensor logits = model.forward(trials_to_input(test, idx), nn::Mode::Eval);
        for (int n = 0; n < logits.dim(0); ++n) {
            int best = 0;
            for (int k = 1; k < logits.dim(1); ++k)
                if (logits.at(n, k) > logits.at(n, best)) best = k;
            if (best == test.labels[size_t(idx[size_t(n)])]) ++correct;
        }
    }
    return 100.0 * correct / test.n_trials;
}

void write_epoch_log(const std::string& path, const std::vector<EpochLogRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write epoch log " + path);
    out << "epoch,train_ce,train_kl,train_sk,train_total,val_loss,val_acc\n";
    out.precision(10);
    for (const auto& r : rows)
        out << r.epoch << ',' << r.train_ce << ',' << r.train_kl << ',' << r.train_sk << ','
            << r.train_total << ',' << r.val_loss << ',' << r.val_acc << "\n";
}

} // namespace eegkd::training
