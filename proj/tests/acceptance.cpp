// Acceptance suite: one line per criterion. Criteria 1-9 need no data and
// finish in minutes; 10-12 replicate desk-scale results and run only when
// EEGKD_BCIC_ROOT points at prepared BCIC-IV-2a containers
// (S01..S09_{train,test}.eegc and montages/4p.txt).
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "eegkd/data.hpp"
#include "eegkd/distill.hpp"
#include "eegkd/experiments.hpp"
#include "eegkd/models.hpp"
#include "eegkd/rng.hpp"
#include "eegkd/signal.hpp"
#include "eegkd/stats.hpp"
#include "eegkd/training.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace eegkd;
using distill::Criterion;
using distill::DistillConfig;

namespace {

// ---------------------------------------------------------- brute oracles

std::vector<double> chan_vec(const Tensor& f, int i, int c, bool centered) {
    double mean = 0;
    if (centered) {
        int64_t n = 0;
        for (int s = 0; s < f.dim(0); ++s)
            for (int h = 0; h < f.dim(2); ++h)
                for (int w = 0; w < f.dim(3); ++w) {
                    mean += f.at(s, c, h, w);
                    ++n;
                }
        mean /= double(n);
    }
    std::vector<double> v;
    for (int h = 0; h < f.dim(2); ++h)
        for (int w = 0; w < f.dim(3); ++w) v.push_back(f.at(i, c, h, w) - mean);
    return v;
}

double brute_sim(const std::vector<double>& a, const std::vector<double>& b, Criterion crit) {
    if (crit == Criterion::Plv) return signal::plv(a, b);
    double d = 0, na = 0, nb = 0, ssq = 0;
    for (size_t k = 0; k < a.size(); ++k) {
        d += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
        ssq += (a[k] - b[k]) * (a[k] - b[k]);
    }
    switch (crit) {
        case Criterion::Cosine:
            return d / (std::max(std::sqrt(na), 1e-8) * std::max(std::sqrt(nb), 1e-8));
        case Criterion::Dot: return d;
        case Criterion::L2: return -std::sqrt(ssq);
        default: return 0;
    }
}

Tensor brute_matrix(const Tensor& f, Criterion crit, bool centered) {
    const int N = f.dim(0), C = f.dim(1);
    Tensor m({N, N});
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double acc = 0;
            for (int c = 0; c < C; ++c)
                acc += brute_sim(chan_vec(f, i, c, centered), chan_vec(f, j, c, centered), crit);
            m.at(i, j) = acc / C;
        }
    return m;
}

double brute_sk(const Tensor& ft, const Tensor& fs, Criterion crit, bool centered) {
    const Tensor mt = brute_matrix(ft, crit, centered);
    const Tensor ms = brute_matrix(fs, crit, centered);
    double s = 0;
    const int N = mt.dim(0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) s += (mt.at(i, j) - ms.at(i, j)) * (mt.at(i, j) - ms.at(i, j));
    return s / double(N * N);
}

double brute_signed_rank_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    if (d.empty()) return 1.0;
    std::vector<double> mag;
    for (double v : d) mag.push_back(std::fabs(v));
    const auto r = stats::midranks(mag);
    double tobs = 0;
    for (size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) tobs += r[i];
    long long le = 0, ge = 0;
    const size_t n = d.size();
    for (long long mask = 0; mask < (1LL << n); ++mask) {
        double t = 0;
        for (size_t i = 0; i < n; ++i)
            if (mask & (1LL << i)) t += r[i];
        if (t <= tobs + 1e-12) ++le;
        if (t >= tobs - 1e-12) ++ge;
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / double(1LL << n));
}

double brute_rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto r = stats::midranks(pooled);
    double wobs = 0;
    for (size_t i = 0; i < a.size(); ++i) wobs += r[i];
    long long le = 0, ge = 0, total = 0;
    const size_t n = pooled.size(), na = a.size();
    std::function<void(size_t, size_t, double)> rec = [&](size_t start, size_t left, double sum) {
        if (left == 0) {
            ++total;
            if (sum <= wobs + 1e-12) ++le;
            if (sum >= wobs - 1e-12) ++ge;
            return;
        }
        for (size_t i = start; i + left <= n; ++i) rec(i + 1, left - 1, sum + r[i]);
    };
    rec(0, na, 0.0);
    return std::min(1.0, 2.0 * std::min(le, ge) / double(total));
}

Tensor random_taps(Rng& rng, int n, int c, int hw) {
    Tensor t({n, c, 1, hw});
    for (auto& v : t.data) v = rng.uniform(-2, 2);
    return t;
}

models::TapSet random_tapset(Rng& rng, int n) {
    models::TapSet t;
    t.lf1 = random_taps(rng, n, 2, 6);
    t.lf2 = random_taps(rng, n, 3, 8);
    t.lf3 = random_taps(rng, n, 2, 5);
    t.logits = Tensor({n, 4});
    for (auto& v : t.logits.data) v = rng.uniform(-2, 2);
    return t;
}

// --------------------------------------------------------------- criteria

using Check = std::function<std::optional<std::string>()>;

std::optional<std::string> criterion_sk_identity() {
    Rng rng(1001);
    DistillConfig cfg;
    for (int i = 0; i < 50; ++i) {
        const int n = 2 + int(rng.below(3));
        const auto taps = random_tapset(rng, n);
        const double self = distill::sk_loss(taps, taps, cfg);
        if (self != 0.0) return "sk_loss(taps, taps) = " + std::to_string(self) + " != 0";
        const auto other = random_tapset(rng, n);
        if (distill::sk_loss(taps, other, cfg) < 0.0) return "sk_loss went negative";
    }
    return std::nullopt;
}

std::optional<std::string> criterion_oracle_equivalence() {
    Rng rng(1002);
    for (Criterion crit : {Criterion::Cosine, Criterion::Dot, Criterion::L2, Criterion::Plv})
        for (bool centered : {true, false})
            for (int inst = 0; inst < 50; ++inst) {
                const int n = 1 + int(rng.below(4));
                const int c = 1 + int(rng.below(3));
                const int hw = 4 + int(rng.below(13));
                const Tensor f = random_taps(rng, n, c, hw);
                const auto M = distill::similarity_matrix(f, crit, centered);
                const Tensor ref = brute_matrix(f, crit, centered);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        if (std::fabs(M.values.at(i, j) - ref.at(i, j)) > 1e-6)
                            return "similarity mismatch crit=" + distill::to_string(crit);
                if (n >= 2) {
                    models::TapSet t, s;
                    t.lf2 = random_taps(rng, n, c, hw);
                    s.lf2 = random_taps(rng, n, c, hw);
                    DistillConfig cfg;
                    cfg.layer_pairs = {{"LF2", "LF2"}};
                    cfg.criterion = crit;
                    cfg.centered = centered;
                    const double got = distill::sk_loss(t, s, cfg);
                    const double want = brute_sk(t.lf2, s.lf2, crit, centered);
                    if (std::fabs(got - want) > 1e-6)
                        return "sk_loss mismatch crit=" + distill::to_string(crit);
                }
            }
    return std::nullopt;
}

std::optional<std::string> criterion_gradient_check() {
    Rng rng(1003);
    for (int inst = 0; inst < 20; ++inst) {
        const int n = 2 + int(rng.below(3));
        models::TapSet t = random_tapset(rng, n);
        models::TapSet s = random_tapset(rng, n);
        std::vector<int> y;
        for (int i = 0; i < n; ++i) y.push_back(int(rng.below(4)));
        DistillConfig cfg; // Eq. 4 defaults: CE + beta * SK
        cfg.use_logits_loss = false;

        distill::BatchOutputs bo;
        bo.teacher = &t;
        bo.student = &s;
        bo.y = y;
        Tensor grad_logits;
        distill::TapGrads tap_grads;
        distill::total_loss(bo, cfg, &grad_logits, &tap_grads);

        auto value = [&] {
            distill::BatchOutputs b2;
            b2.teacher = &t;
            b2.student = &s;
            b2.y = y;
            return distill::total_loss(b2, cfg).total;
        };
        const double h = 1e-6;
        double num = 0, den = 0;
        auto probe = [&](Tensor& target, const Tensor& analytic) {
            for (size_t i = 0; i < target.data.size(); ++i) {
                const double keep = target.data[i];
                target.data[i] = keep + h;
                const double up = value();
                target.data[i] = keep - h;
                const double dn = value();
                target.data[i] = keep;
                const double fd = (up - dn) / (2 * h);
                num += (analytic.data[i] - fd) * (analytic.data[i] - fd);
                den += std::max(analytic.data[i] * analytic.data[i], fd * fd);
            }
        };
        if (tap_grads.lf2) probe(s.lf2, *tap_grads.lf2);
        if (tap_grads.lf3) probe(s.lf3, *tap_grads.lf3);
        probe(s.logits, grad_logits);
        const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
        if (rel > 1e-4) return "relative gradient error " + std::to_string(rel);
    }
    return std::nullopt;
}

std::optional<std::string> criterion_hkd_reductions() {
    Rng rng(1004);
    Tensor zt({3, 4}), zs({3, 4});
    for (auto& v : zt.data) v = rng.uniform(-2, 2);
    for (auto& v : zs.data) v = rng.uniform(-2, 2);
    const std::vector<int> y = {0, 2, 1};
    if (distill::hkd_loss(zt, zs, y, 0.0, 4.0) != distill::cross_entropy(zs, y))
        return "alpha=0 did not reduce to CE exactly";
    const double same = distill::hkd_loss(zs, zs, y, 0.7, 3.0);
    if (std::fabs(same - 0.3 * distill::cross_entropy(zs, y)) > 1e-8)
        return "KL component above 1e-8 for identical logits";
    // T=1, alpha=1: batch-mean KL, computed independently
    double kl = 0;
    for (int n = 0; n < 3; ++n) {
        double st = 0, ss = 0;
        for (int k = 0; k < 4; ++k) {
            st += std::exp(zt.at(n, k));
            ss += std::exp(zs.at(n, k));
        }
        for (int k = 0; k < 4; ++k) {
            const double p = std::exp(zt.at(n, k)) / st;
            const double q = std::exp(zs.at(n, k)) / ss;
            kl += p * std::log(p / q);
        }
    }
    kl /= 3;
    if (std::fabs(distill::hkd_loss(zt, zs, y, 1.0, 1.0) - kl) > 1e-9)
        return "T=1, alpha=1 did not equal the batch-mean KL";
    return std::nullopt;
}

std::optional<std::string> criterion_micro_example() {
    models::TapSet teacher, student;
    teacher.lf2 = Tensor({2, 1, 1, 2});
    teacher.lf2.data = {1, 0, 0, 1};
    student.lf2 = Tensor({2, 1, 1, 2});
    student.lf2.data = {1, 0, 0, 2};
    DistillConfig cfg;
    cfg.layer_pairs = {{"LF2", "LF2"}};

    const auto mt = distill::similarity_matrix(teacher.lf2, cfg.criterion, cfg.centered);
    if (std::fabs(mt.values.at(0, 0) - 1) > 1e-9 || std::fabs(mt.values.at(0, 1) + 1) > 1e-9)
        return "teacher matrix is not [[1,-1],[-1,1]]";
    const auto ms = distill::similarity_matrix(student.lf2, cfg.criterion, cfg.centered);
    if (std::fabs(ms.values.at(0, 1) + 0.97619) > 1e-5)
        return "student off-diagonal is " + std::to_string(ms.values.at(0, 1));
    const double loss = distill::sk_loss(teacher, student, cfg);
    const double oracle = brute_sk(teacher.lf2, student.lf2, Criterion::Cosine, true);
    if (std::fabs(loss - oracle) > 1e-12) return "loss disagrees with the oracle";
    if (std::fabs(loss - 2.8353e-4) > 1e-6)
        return "L_SK = " + std::to_string(loss) + " not within 1e-6 of 2.835e-4";
    return std::nullopt;
}

std::optional<std::string> criterion_stats() {
    const auto sr = stats::wilcoxon_signed_rank({2, 3, 4}, {1, 1, 1});
    if (std::fabs(sr.p_value - 0.25) > 1e-12) return "signed-rank [1,2,3] case p != 0.25";
    const auto rs = stats::wilcoxon_rank_sum({1, 2, 3}, {4, 5, 6});
    if (std::fabs(rs.p_value - 0.1) > 1e-12) return "rank-sum [1,2,3] vs [4,5,6] p != 0.1";

    Rng rng(1006);
    for (int inst = 0; inst < 100; ++inst) {
        const int n = 1 + int(rng.below(8));
        std::vector<double> a(size_t(n), 0.0), b(size_t(n), 0.0);
        for (int i = 0; i < n; ++i) {
            a[size_t(i)] = std::floor(rng.uniform(-4, 4));
            b[size_t(i)] = std::floor(rng.uniform(-4, 4));
        }
        const auto got = stats::wilcoxon_signed_rank(a, b);
        if (std::fabs(got.p_value - brute_signed_rank_p(a, b)) > 1e-6)
            return "signed-rank enumeration mismatch at n=" + std::to_string(n);
        const int nb = 1 + int(rng.below(size_t(8 - std::min(n, 7))));
        std::vector<double> c(size_t(nb), 0.0);
        for (auto& v : c) v = std::floor(rng.uniform(-4, 4));
        const auto got2 = stats::wilcoxon_rank_sum(a, c);
        if (std::fabs(got2.p_value - brute_rank_sum_p(a, c)) > 1e-6)
            return "rank-sum enumeration mismatch";
    }
    return std::nullopt;
}

std::optional<std::string> criterion_filters() {
    Tensor dc = Tensor::full({1, 512}, 1.0);
    Tensor y = signal::bandpass(dc, 4, 38, 128);
    double mx = 0;
    for (double v : y.data) mx = std::max(mx, std::fabs(v));
    if (mx >= 1e-3) return "DC leak " + std::to_string(mx);

    auto sine = [](double f, int n) {
        Tensor t({1, n});
        for (int i = 0; i < n; ++i) t.data[size_t(i)] = std::sin(2 * M_PI * f * i / 128.0);
        return t;
    };
    y = signal::bandpass(sine(20, 1024), 4, 38, 128);
    double a20 = 0;
    for (int i = 256; i < 768; ++i) a20 = std::max(a20, std::fabs(y.data[size_t(i)]));
    if (a20 < 0.9 || a20 > 1.1) return "20 Hz gain " + std::to_string(a20);

    y = signal::bandpass(sine(60, 1024), 4, 38, 128);
    double a60 = 0;
    for (int i = 256; i < 768; ++i) a60 = std::max(a60, std::fabs(y.data[size_t(i)]));
    if (20 * std::log10(1.0 / std::max(a60, 1e-300)) <= 20)
        return "60 Hz attenuation only " + std::to_string(-20 * std::log10(a60)) + " dB";
    return std::nullopt;
}

std::optional<std::string> criterion_determinism() {
    const EpochedDataset train = testutil::synthetic_dataset(64, 4, 96, 3, 42, "SYN", "T");
    const EpochedDataset test = testutil::synthetic_dataset(32, 4, 96, 3, 43, "SYN", "E");
    const Montage m = Montage::subset("2ch", train.channel_names, {"ch0", "ch2"});

    training::TrainConfig base;
    base.epochs = 20;
    base.batch_size = 16;
    base.val_fraction = 0.125;
    base.arch = {models::Arch::SCCNet, 4, 96, 3};
    auto teacher = training::pretrain_teacher(train, &test, [&] {
        auto c = base;
        c.seed = 7;
        return c;
    }());
    if (teacher.record.aborted) return "teacher smoke run aborted";

    training::TrainConfig scfg = base;
    scfg.seed = 11;
    scfg.arch = {models::Arch::SCCNet, 2, 96, 3};
    scfg.distill = DistillConfig{};
    scfg.distill->beta = 450;
    auto r1 = training::distill_student(train, m, teacher.model.get(), &test, scfg, "t");
    auto r2 = training::distill_student(train, m, teacher.model.get(), &test, scfg, "t");
    if (!r1.record.equivalent(r2.record)) return "equal seeds produced different run records";
    if (r1.model->net.state_hash() != r2.model->net.state_hash())
        return "equal seeds produced different parameters";

    auto dcfg = scfg;
    dcfg.distill->beta = 0;
    dcfg.distill->alpha = 0;
    dcfg.distill->use_logits_loss = false;
    auto degenerate = training::distill_student(train, m, teacher.model.get(), &test, dcfg);
    auto bcfg = scfg;
    bcfg.distill.reset();
    auto baseline = training::train_student_baseline(train, m, &test, bcfg);
    if (degenerate.model->net.state_hash() != baseline.model->net.state_hash())
        return "beta=0, alpha=0 distillation differs from the baseline run";
    if (degenerate.record.test_accuracy != baseline.record.test_accuracy)
        return "beta=0 accuracy differs from baseline";
    return std::nullopt;
}

std::optional<std::string> criterion_elimination() {
    const std::map<std::string, double> weights{{"a", 3}, {"b", 1}, {"c", 2}};
    auto evaluator = [&](const std::vector<std::string>& chans) {
        double s = 0;
        for (const auto& ch : chans) s += weights.at(ch);
        return s;
    };
    const auto res = experiments::backward_eliminate(evaluator, {"a", "b", "c"});
    if (res.order != std::vector<std::string>{"b", "c", "a"})
        return "stub evaluator order is not b, c, a";
    const auto single = experiments::backward_eliminate(evaluator, {"a"});
    if (!single.order.empty()) return "single-channel elimination not empty";
    return std::nullopt;
}

// ------------------------------------------------- desk-scale reproduction

struct DeskData {
    std::vector<std::string> subjects;
    std::string root;
    std::string montage_4p;
};

std::optional<DeskData> desk_data() {
    const char* env = std::getenv("EEGKD_BCIC_ROOT");
    if (!env) return std::nullopt;
    DeskData d;
    d.root = env;
    for (int i = 1; i <= 9; ++i) {
        char buf[8];
        snprintf(buf, sizeof buf, "S%02d", i);
        d.subjects.push_back(buf);
        if (!fs::exists(fs::path(d.root) / (std::string(buf) + "_train.eegc")) ||
            !fs::exists(fs::path(d.root) / (std::string(buf) + "_test.eegc")))
            return std::nullopt;
    }
    d.montage_4p = (fs::path(d.root) / "montages" / "4p.txt").string();
    if (!fs::exists(d.montage_4p)) return std::nullopt;
    return d;
}

training::TrainConfig paper_config(models::Arch arch, int n_channels, int n_samples, int n_classes,
                                   uint64_t seed) {
    training::TrainConfig cfg;
    cfg.epochs = 500;
    // wiring-smoke override; the accuracy targets only hold at full epochs
    if (const char* e = std::getenv("EEGKD_DESK_EPOCHS")) cfg.epochs = std::atoi(e);
    cfg.learning_rate = 5e-4;
    cfg.weight_decay = 0.1;
    cfg.batch_size = 128;
    cfg.val_fraction = 0.125;
    cfg.seed = seed;
    cfg.arch = {arch, n_channels, n_samples, n_classes};
    return cfg;
}

struct DeskState {
    std::map<std::string, std::unique_ptr<models::Model>> teachers;
    std::map<std::string, double> teacher_acc;
    std::map<std::string, std::vector<double>> baseline_acc; // per subject, per seed
    std::map<std::string, double> ablation_mean;
};

DeskState g_desk;

std::optional<std::string> criterion_teacher_repro(const DeskData& d) {
    double sum = 0;
    for (const auto& s : d.subjects) {
        const auto train = load_epoched((fs::path(d.root) / (s + "_train.eegc")).string());
        const auto test = load_epoched((fs::path(d.root) / (s + "_test.eegc")).string());
        auto outcome = training::pretrain_teacher(
            train, &test,
            paper_config(models::Arch::SCCNet, train.n_channels, train.n_samples, train.n_classes, 0));
        if (outcome.record.aborted) return "teacher run aborted for " + s;
        g_desk.teacher_acc[s] = *outcome.record.test_accuracy;
        g_desk.teachers[s] = std::move(outcome.model);
        sum += g_desk.teacher_acc[s];
    }
    const double mean = sum / double(d.subjects.size());
    std::cerr << "  teacher SCCNet-22 mean accuracy: " << mean << "%\n";
    if (std::fabs(mean - 80.25) > 3.0)
        return "teacher mean " + std::to_string(mean) + "% outside 80.25 +/- 3";
    return std::nullopt;
}

// mean accuracy of SK students over subjects x seeds for one distill config;
// also fills per-subject means for the significance test
double desk_student_mean(const DeskData& d, const std::vector<uint64_t>& seeds,
                         const DistillConfig* dcfg, std::map<std::string, double>* per_subject) {
    double total = 0;
    int count = 0;
    for (const auto& s : d.subjects) {
        const auto train = load_epoched((fs::path(d.root) / (s + "_train.eegc")).string());
        const auto test = load_epoched((fs::path(d.root) / (s + "_test.eegc")).string());
        const Montage m = load_montage(d.montage_4p, train.channel_names);
        double subj_sum = 0;
        for (uint64_t seed : seeds) {
            auto cfg = paper_config(models::Arch::SCCNet, int(m.channels.size()), train.n_samples,
                                    train.n_classes, seed);
            if (dcfg) cfg.distill = *dcfg;
            auto outcome = training::distill_student(
                train, m, dcfg ? g_desk.teachers.at(s).get() : nullptr, &test, cfg,
                dcfg ? "teacher-" + s : "");
            if (outcome.record.aborted || !outcome.record.test_accuracy) continue;
            subj_sum += *outcome.record.test_accuracy;
            if (!dcfg) g_desk.baseline_acc[s].push_back(*outcome.record.test_accuracy);
            total += *outcome.record.test_accuracy;
            ++count;
        }
        if (per_subject) (*per_subject)[s] = subj_sum / double(seeds.size());
    }
    return count ? total / count : std::numeric_limits<double>::quiet_NaN();
}

std::optional<std::string> criterion_sk_repro(const DeskData& d) {
    const std::vector<uint64_t> seeds = {0, 1, 2};
    std::map<std::string, double> base_subj, sk_subj;
    const double base_mean = desk_student_mean(d, seeds, nullptr, &base_subj);
    DistillConfig sk; // paper defaults: beta 450, cosine, centered, LF2+LF3
    sk.use_logits_loss = false;
    const double sk_mean = desk_student_mean(d, seeds, &sk, &sk_subj);
    g_desk.ablation_mean["baseline"] = base_mean;
    g_desk.ablation_mean["cosine+centered"] = sk_mean;
    std::cerr << "  SK mean " << sk_mean << "% vs baseline " << base_mean << "%\n";
    if (std::fabs(sk_mean - 55.31) > 3.0)
        return "SK mean " + std::to_string(sk_mean) + "% outside 55.31 +/- 3";
    if (!(sk_mean > base_mean)) return "SK mean not above the matched baseline mean";
    std::vector<double> a, b;
    for (const auto& s : d.subjects) {
        a.push_back(sk_subj.at(s));
        b.push_back(base_subj.at(s));
    }
    const auto test = stats::wilcoxon_signed_rank(a, b);
    if (!(test.p_value < 0.05))
        return "signed-rank p = " + std::to_string(test.p_value) + " not below 0.05";
    return std::nullopt;
}

std::optional<std::string> criterion_ablation_repro(const DeskData& d) {
    const std::vector<uint64_t> seeds = {0, 1, 2};
    auto run_variant = [&](Criterion crit, bool centered) {
        DistillConfig cfg;
        cfg.criterion = crit;
        cfg.centered = centered;
        cfg.use_logits_loss = false;
        return desk_student_mean(d, seeds, &cfg, nullptr);
    };
    auto& m = g_desk.ablation_mean;
    if (!m.count("cosine+centered")) m["cosine+centered"] = run_variant(Criterion::Cosine, true);
    m["cosine+uncentered"] = run_variant(Criterion::Cosine, false);
    m["dot"] = run_variant(Criterion::Dot, true);
    m["plv"] = run_variant(Criterion::Plv, true);
    m["l2"] = run_variant(Criterion::L2, true);
    std::cerr << "  ablation means: cos+c " << m["cosine+centered"] << " cos-u "
              << m["cosine+uncentered"] << " dot " << m["dot"] << " plv " << m["plv"] << " l2 "
              << m["l2"] << " base " << m["baseline"] << "\n";
    if (!(m["cosine+centered"] >= m["cosine+uncentered"]))
        return "cosine+centered below cosine+uncentered";
    if (!(m["cosine+uncentered"] >= m["dot"])) return "cosine+uncentered below dot";
    if (!(m["dot"] >= m["plv"])) return "dot below plv";
    if (!(m["l2"] < m["baseline"])) return "l2 did not fall below the baseline";
    return std::nullopt;
}

} // namespace

int main() {
    struct Item {
        int index;
        std::string name;
        Check fn;
    };
    std::vector<Item> items = {
        {1, "sk-loss identity and nonnegativity", criterion_sk_identity},
        {2, "oracle equivalence across criteria", criterion_oracle_equivalence},
        {3, "gradient check vs central differences", criterion_gradient_check},
        {4, "hkd reductions", criterion_hkd_reductions},
        {5, "worked micro example", criterion_micro_example},
        {6, "wilcoxon exact enumeration", criterion_stats},
        {7, "band-pass filter response", criterion_filters},
        {8, "seeded determinism and baseline equality", criterion_determinism},
        {9, "backward elimination stub", criterion_elimination},
    };

    int failures = 0;
    auto run_item = [&](int index, const std::string& name, const Check& fn) {
        std::optional<std::string> err;
        try {
            err = fn();
        } catch (const std::exception& e) {
            err = std::string("exception: ") + e.what();
        }
        if (err) {
            ++failures;
            std::cout << "FAIL criterion-" << index << " (" << name << "): " << *err << "\n";
        } else {
            std::cout << "PASS criterion-" << index << " (" << name << ")\n";
        }
    };
    for (const auto& item : items) run_item(item.index, item.name, item.fn);

    const auto desk = desk_data();
    if (!desk) {
        for (int i = 10; i <= 12; ++i)
            std::cout << "SKIP criterion-" << i
                      << ": requires BCIC-IV-2a containers (set EEGKD_BCIC_ROOT)\n";
    } else {
        run_item(10, "teacher reproduction", [&] { return criterion_teacher_repro(*desk); });
        run_item(11, "SK distillation reproduction", [&] { return criterion_sk_repro(*desk); });
        run_item(12, "ablation directionality", [&] { return criterion_ablation_repro(*desk); });
    }

    std::cout << (failures == 0 ? "ACCEPTANCE OK" : "ACCEPTANCE FAILURES") << "\n";
    return failures == 0 ? 0 : 1;
}
