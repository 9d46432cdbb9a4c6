#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "eegkd/errors.hpp"
#include "eegkd/training.hpp"
#include "helpers.hpp"

using namespace eegkd;
using namespace eegkd::training;

namespace {

// tiny but learnable setup: SCCNet needs at least 75 samples
TrainConfig smoke_config(int n_channels, uint64_t seed, int epochs = 6) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.val_fraction = 0.25;
    cfg.seed = seed;
    cfg.arch = {models::Arch::SCCNet, n_channels, 96, 3};
    cfg.montage_name = "toy";
    return cfg;
}

struct Fixture {
    EpochedDataset train = testutil::synthetic_dataset(48, 4, 96, 3, 100, "S01", "T");
    EpochedDataset test = testutil::synthetic_dataset(24, 4, 96, 3, 200, "S01", "E");
    Montage student = Montage::subset("2ch", train.channel_names, {"ch0", "ch2"});
};

} // namespace

TEST_CASE("teacher pretraining: checkpoint tracks the minimum validation loss") {
    Fixture f;
    auto outcome = pretrain_teacher(f.train, &f.test, smoke_config(4, 1));
    REQUIRE_FALSE(outcome.record.aborted);
    REQUIRE(outcome.record.best_epoch >= 0);
    double min_val = std::numeric_limits<double>::infinity();
    int min_epoch = -1;
    for (const auto& row : outcome.log)
        if (row.val_loss < min_val) {
            min_val = row.val_loss;
            min_epoch = row.epoch;
        }
    CHECK(outcome.record.best_val_loss == doctest::Approx(min_val).epsilon(1e-12));
    CHECK(outcome.record.best_epoch == min_epoch);
    CHECK(outcome.record.best_val_loss <= outcome.log.back().val_loss + 1e-12);

    // restored parameters reproduce the recorded validation loss
    auto [train_split, val_split] = split_train_val(f.train, 0.25, 1);
    std::vector<int> idx(size_t(val_split.n_trials));
    for (int i = 0; i < val_split.n_trials; ++i) idx[size_t(i)] = i;
    const Tensor logits =
        outcome.model->forward(trials_to_input(val_split, idx), nn::Mode::Eval);
    const double reval = distill::cross_entropy(logits, val_split.labels);
    CHECK(std::fabs(reval - outcome.record.best_val_loss) < 1e-5);
}

TEST_CASE("same seed and data reproduce the run record exactly") {
    Fixture f;
    auto a = pretrain_teacher(f.train, &f.test, smoke_config(4, 7));
    auto b = pretrain_teacher(f.train, &f.test, smoke_config(4, 7));
    CHECK(a.record.equivalent(b.record));
    CHECK(a.model->net.state_hash() == b.model->net.state_hash());
    auto c = pretrain_teacher(f.train, &f.test, smoke_config(4, 8));
    CHECK_FALSE(a.record.equivalent(c.record));
}

TEST_CASE("teacher parameters are bit-identical before and after distillation") {
    Fixture f;
    auto teacher = pretrain_teacher(f.train, &f.test, smoke_config(4, 2));
    const uint64_t before = teacher.model->net.state_hash();

    TrainConfig cfg = smoke_config(2, 3);
    cfg.distill = distill::DistillConfig{};
    cfg.distill->beta = 450;
    auto student = distill_student(f.train, f.student, teacher.model.get(), &f.test, cfg, "t0");
    REQUIRE_FALSE(student.record.aborted);
    CHECK(teacher.model->net.state_hash() == before);
    CHECK(student.record.role == Role::StudentDistilled);
    CHECK(student.record.teacher_run_id == "t0");
}

TEST_CASE("distillation with beta 0 and no logits loss equals the baseline run exactly") {
    Fixture f;
    auto teacher = pretrain_teacher(f.train, &f.test, smoke_config(4, 2));

    TrainConfig cfg = smoke_config(2, 5);
    cfg.distill = distill::DistillConfig{};
    cfg.distill->beta = 0;
    cfg.distill->use_logits_loss = false;
    // teacher present but unused: arithmetic must match the teacher-less run
    auto degenerate = distill_student(f.train, f.student, teacher.model.get(), &f.test, cfg);
    auto baseline = train_student_baseline(f.train, f.student, &f.test, smoke_config(2, 5));

    REQUIRE_FALSE(degenerate.record.aborted);
    CHECK(degenerate.record.role == Role::StudentBaseline);
    CHECK(*degenerate.record.test_accuracy == *baseline.record.test_accuracy);
    CHECK(degenerate.record.best_val_loss == baseline.record.best_val_loss);
    CHECK(degenerate.record.best_epoch == baseline.record.best_epoch);
    CHECK(degenerate.model->net.state_hash() == baseline.model->net.state_hash());
}

TEST_CASE("distilled training runs and logs all loss components") {
    Fixture f;
    auto teacher = pretrain_teacher(f.train, &f.test, smoke_config(4, 2));
    TrainConfig cfg = smoke_config(2, 6, 4);
    cfg.distill = distill::DistillConfig{};
    cfg.distill->beta = 450;
    cfg.distill->use_logits_loss = true;
    auto outcome = distill_student(f.train, f.student, teacher.model.get(), &f.test, cfg, "t");
    REQUIRE_FALSE(outcome.record.aborted);
    REQUIRE(outcome.log.size() == 4);
    for (const auto& row : outcome.log) {
        CHECK(row.train_sk >= 0.0);
        CHECK(row.train_kl >= -1e-12);
        CHECK(std::isfinite(row.val_loss));
    }
    CHECK(outcome.record.test_accuracy.has_value());
}

TEST_CASE("non-finite training loss aborts with a diagnostic record") {
    Fixture f;
    // corrupt every trial's first sample; the first batch already yields NaN
    for (int t = 0; t < f.train.n_trials; ++t)
        f.train.data[size_t(t) * f.train.n_channels * f.train.n_samples] =
            std::numeric_limits<float>::quiet_NaN();
    auto outcome = train_student_baseline(f.train, f.student, &f.test, smoke_config(2, 1, 5));
    CHECK(outcome.record.aborted);
    CHECK(outcome.record.diagnostic.find("non-finite") != std::string::npos);
    CHECK_FALSE(outcome.record.test_accuracy.has_value());
}

TEST_CASE("evaluate: constant logits fall back to the lowest class index") {
    Fixture f;
    auto model = models::build_model({models::Arch::SCCNet, 4, 96, 3}, 0);
    // zero the classifier: logits become constant across classes
    auto params = model->net.params();
    for (auto* p : params)
        if (p->name.rfind("fc", 0) == 0) p->value.fill(0.0);
    EpochedDataset balanced = testutil::synthetic_dataset(30, 4, 96, 3, 17);
    const double acc = evaluate(*model, balanced);
    // 30 trials cycle labels 0,1,2 -> exactly a third are class 0
    CHECK(acc == doctest::Approx(100.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("evaluate enforces montage agreement") {
    Fixture f;
    auto model = models::build_model({models::Arch::SCCNet, 2, 96, 3}, 0);
    CHECK_THROWS_AS(evaluate(*model, f.train), EvalError); // 4-channel data
}

TEST_CASE("evaluate accuracy arithmetic") {
    // model that classifies the synthetic data perfectly would give 100;
    // here check the percent arithmetic through a trained model's bounds
    Fixture f;
    auto outcome = pretrain_teacher(f.train, &f.test, smoke_config(4, 3));
    REQUIRE(outcome.record.test_accuracy.has_value());
    CHECK(*outcome.record.test_accuracy >= 0.0);
    CHECK(*outcome.record.test_accuracy <= 100.0);
}

TEST_CASE("epoch log CSV rows are written") {
    testutil::TmpDir tmp("log");
    Fixture f;
    auto outcome = pretrain_teacher(f.train, &f.test, smoke_config(4, 4, 3));
    write_epoch_log(tmp.str("run.csv"), outcome.log);
    std::ifstream in(tmp.str("run.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,train_ce,train_kl,train_sk,train_total,val_loss,val_acc");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}
