#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eegkd/models.hpp"
#include "eegkd/tensor.hpp"

namespace eegkd::distill {

enum class Criterion { Cosine, Dot, L2, Plv };
enum class CenteringScope { Batch, Sample };

Criterion criterion_from_string(const std::string& s);
std::string to_string(Criterion c);

struct SimilarityMatrix {
    Tensor values; // N x N, symmetric
    Criterion criterion = Criterion::Cosine;
    bool centered = true;
    std::string tap_name;
};

struct DistillConfig {
    std::vector<std::pair<std::string, std::string>> layer_pairs = {{"LF2", "LF2"}, {"LF3", "LF3"}};
    double beta = 450.0;
    double alpha = 0.9;
    double temperature = 4.0;
    Criterion criterion = Criterion::Cosine;
    bool centered = true;
    CenteringScope centering_scope = CenteringScope::Batch;
    bool use_logits_loss = false;

    void validate() const;
};

// Subtract one scalar mean per channel. Batch scope (the default) averages
// over the whole batch-and-spatial slab of a channel; Sample scope averages
// each sample's map separately.
Tensor zero_center(const Tensor& f, CenteringScope scope = CenteringScope::Batch);

// values[i][j] = (1/C) sum_c sim(f[i,c], f[j,c]) over flattened channel maps.
// Cosine denominators are clamped at eps = 1e-8, so an all-zero channel
// contributes similarity 0 rather than NaN.
SimilarityMatrix similarity_matrix(const Tensor& f, Criterion criterion, bool centered,
                                   CenteringScope scope = CenteringScope::Batch);

// Same matrix plus d(loss)/d(f) given d(loss)/d(values); used by sk_loss.
SimilarityMatrix similarity_matrix_with_grad(const Tensor& f, Criterion criterion, bool centered,
                                             CenteringScope scope, const Tensor& grad_values,
                                             Tensor* grad_f);

struct TapGrads {
    std::optional<Tensor> lf1, lf2, lf3;
    std::map<std::string, Tensor> as_map() const;
};

// Sum over layer pairs of the mean squared difference (all N^2 entries)
// between teacher and student similarity matrices.
double sk_loss(const models::TapSet& teacher, const models::TapSet& student, const DistillConfig& cfg);
double sk_loss_with_grad(const models::TapSet& teacher, const models::TapSet& student,
                         const DistillConfig& cfg, TapGrads* student_grads);

// (1-alpha) * CE(y, softmax(z_s)) + alpha * T^2 * KL(softmax(z_t/T) || softmax(z_s/T)),
// KL averaged over the batch. Gradients flow to the student logits only.
double hkd_loss(const Tensor& z_teacher, const Tensor& z_student, const std::vector<int>& y,
                double alpha, double temperature, Tensor* grad_z_student = nullptr);

// Batch-mean cross entropy on raw logits.
double cross_entropy(const Tensor& logits, const std::vector<int>& y, Tensor* grad = nullptr);

// Per-batch objective with its logged components. Weighted terms sum to
// `total` exactly.
struct LossBreakdown {
    double total = 0;
    double ce = 0;  // raw cross entropy
    double kl = 0;  // raw batch-mean KL (unscaled)
    double sk = 0;  // raw SK loss
    double term_ce = 0, term_kl = 0, term_sk = 0;
};

struct BatchOutputs {
    const models::TapSet* teacher = nullptr; // may be null when cfg needs no teacher
    const models::TapSet* student = nullptr;
    std::vector<int> y;
};

LossBreakdown total_loss(const BatchOutputs& batch, const DistillConfig& cfg,
                         Tensor* grad_logits = nullptr, TapGrads* tap_grads = nullptr);

// |mean_t exp(i (phi_a - phi_b))| over instantaneous phases; series of
// length >= 4.
double plv_similarity(const std::vector<double>& a, const std::vector<double>& b);

} // namespace eegkd::distill
