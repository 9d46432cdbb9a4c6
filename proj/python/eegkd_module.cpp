#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eegkd/data.hpp"
#include "eegkd/distill.hpp"
#include "eegkd/models.hpp"
#include "eegkd/signal.hpp"
#include "eegkd/stats.hpp"

namespace py = pybind11;
using namespace eegkd;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const DArray& a, int expected_dims) {
    py::buffer_info info = a.request();
    if (info.ndim != expected_dims)
        throw ArgumentError("expected a " + std::to_string(expected_dims) + "-d array");
    std::vector<int> shape;
    for (auto d : info.shape) shape.push_back(int(d));
    Tensor t(shape);
    const double* src = static_cast<const double*>(info.ptr);
    std::copy(src, src + t.numel(), t.data.begin());
    return t;
}

DArray array_from(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    DArray out(shape);
    std::copy(t.data.begin(), t.data.end(), static_cast<double*>(out.request().ptr));
    return out;
}

distill::CenteringScope scope_from(const std::string& s) {
    if (s == "batch") return distill::CenteringScope::Batch;
    if (s == "sample") return distill::CenteringScope::Sample;
    throw ArgumentError("centering scope must be 'batch' or 'sample'");
}

models::TapSet tapset_from(const py::dict& taps) {
    models::TapSet t;
    for (const auto& item : taps) {
        const std::string name = py::cast<std::string>(item.first);
        const Tensor value = tensor_from(py::cast<DArray>(item.second), 4);
        if (name == "logits") t.logits = value.reshaped({value.dim(0), value.dim(1)});
        else t.tap(name) = value;
    }
    return t;
}

distill::DistillConfig config_from(const std::vector<std::pair<std::string, std::string>>& pairs,
                                   double beta, double alpha, double temperature,
                                   const std::string& criterion, bool centered,
                                   const std::string& scope, bool use_logits_loss) {
    distill::DistillConfig cfg;
    cfg.layer_pairs = pairs;
    cfg.beta = beta;
    cfg.alpha = alpha;
    cfg.temperature = temperature;
    cfg.criterion = distill::criterion_from_string(criterion);
    cfg.centered = centered;
    cfg.centering_scope = scope_from(scope);
    cfg.use_logits_loss = use_logits_loss;
    return cfg;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "similarity-keeping knowledge distillation core for low-density EEG decoding";

    py::register_exception<Error>(m, "EegkdError");

    m.def(
        "zero_center",
        [](const DArray& f, const std::string& scope) {
            return array_from(distill::zero_center(tensor_from(f, 4), scope_from(scope)));
        },
        py::arg("features"), py::arg("scope") = "batch",
        "Channel-wise zero centering of an (N, C, H, W) activation array.");

    m.def(
        "similarity_matrix",
        [](const DArray& f, const std::string& criterion, bool centered, const std::string& scope) {
            const auto M = distill::similarity_matrix(
                tensor_from(f, 4), distill::criterion_from_string(criterion), centered,
                scope_from(scope));
            return array_from(M.values);
        },
        py::arg("features"), py::arg("criterion") = "cosine", py::arg("centered") = true,
        py::arg("scope") = "batch",
        "Inter-sample similarity matrix: mean channel-wise similarity of flattened maps.");

    m.def(
        "sk_loss",
        [](const py::dict& teacher, const py::dict& student,
           const std::vector<std::pair<std::string, std::string>>& layer_pairs,
           const std::string& criterion, bool centered, const std::string& scope) {
            auto cfg = config_from(layer_pairs, 1.0, 0.9, 4.0, criterion, centered, scope, false);
            return distill::sk_loss(tapset_from(teacher), tapset_from(student), cfg);
        },
        py::arg("teacher"), py::arg("student"),
        py::arg("layer_pairs") =
            std::vector<std::pair<std::string, std::string>>{{"LF2", "LF2"}, {"LF3", "LF3"}},
        py::arg("criterion") = "cosine", py::arg("centered") = true, py::arg("scope") = "batch",
        "Sum over layer pairs of the MSE between teacher and student similarity matrices.");

    m.def(
        "hkd_loss",
        [](const DArray& z_teacher, const DArray& z_student, const std::vector<int>& y,
           double alpha, double temperature) {
            return distill::hkd_loss(tensor_from(z_teacher, 2), tensor_from(z_student, 2), y,
                                     alpha, temperature);
        },
        py::arg("z_teacher"), py::arg("z_student"), py::arg("y"), py::arg("alpha") = 0.9,
        py::arg("temperature") = 4.0,
        "(1-alpha)*CE + alpha*T^2*KL(teacher || student) with temperature-softened logits.");

    m.def(
        "total_loss",
        [](const py::dict& teacher, const py::dict& student, const std::vector<int>& y,
           const std::vector<std::pair<std::string, std::string>>& layer_pairs, double beta,
           double alpha, double temperature, const std::string& criterion, bool centered,
           const std::string& scope, bool use_logits_loss) {
            const auto cfg = config_from(layer_pairs, beta, alpha, temperature, criterion,
                                         centered, scope, use_logits_loss);
            const models::TapSet t = tapset_from(teacher), s = tapset_from(student);
            distill::BatchOutputs bo;
            bo.teacher = teacher.empty() ? nullptr : &t;
            bo.student = &s;
            bo.y = y;
            const auto b = distill::total_loss(bo, cfg);
            py::dict out;
            out["total"] = b.total;
            out["ce"] = b.ce;
            out["kl"] = b.kl;
            out["sk"] = b.sk;
            out["term_ce"] = b.term_ce;
            out["term_kl"] = b.term_kl;
            out["term_sk"] = b.term_sk;
            return out;
        },
        py::arg("teacher"), py::arg("student"), py::arg("y"),
        py::arg("layer_pairs") =
            std::vector<std::pair<std::string, std::string>>{{"LF2", "LF2"}, {"LF3", "LF3"}},
        py::arg("beta") = 450.0, py::arg("alpha") = 0.9, py::arg("temperature") = 4.0,
        py::arg("criterion") = "cosine", py::arg("centered") = true, py::arg("scope") = "batch",
        py::arg("use_logits_loss") = false,
        "Full training objective with its component breakdown.");

    m.def(
        "plv",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return distill::plv_similarity(a, b);
        },
        py::arg("a"), py::arg("b"), "Phase locking value of two equal-length series.");

    m.def(
        "wilcoxon_signed_rank",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = stats::wilcoxon_signed_rank(a, b);
            return py::make_tuple(r.statistic, r.p_value, r.exact);
        },
        py::arg("a"), py::arg("b"),
        "Two-sided paired test; returns (statistic, p, used_exact_enumeration).");

    m.def(
        "wilcoxon_rank_sum",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = stats::wilcoxon_rank_sum(a, b);
            return py::make_tuple(r.statistic, r.p_value, r.exact);
        },
        py::arg("a"), py::arg("b"),
        "Two-sided unpaired test; returns (statistic, p, used_exact_enumeration).");

    m.def(
        "resample",
        [](const DArray& sig, double fs_src, double fs_dst) {
            return array_from(signal::resample(tensor_from(sig, 2), fs_src, fs_dst));
        },
        py::arg("signal"), py::arg("fs_src"), py::arg("fs_dst"),
        "Polyphase rational resampling of a channels x samples array.");

    m.def(
        "bandpass",
        [](const DArray& sig, double low, double high, double fs, int order) {
            return array_from(signal::bandpass(tensor_from(sig, 2), low, high, fs, order));
        },
        py::arg("signal"), py::arg("low"), py::arg("high"), py::arg("fs"), py::arg("order") = 4,
        "Zero-phase Butterworth band-pass over a channels x samples array.");

    m.def(
        "load_epoched",
        [](const std::string& path) {
            const EpochedDataset d = load_epoched(path);
            py::dict out;
            std::vector<py::ssize_t> shape = {d.n_trials, d.n_channels, d.n_samples};
            py::array_t<float> data(shape);
            std::copy(d.data.begin(), d.data.end(), static_cast<float*>(data.request().ptr));
            out["data"] = data;
            out["labels"] = d.labels;
            out["fs"] = d.fs;
            out["channel_names"] = d.channel_names;
            out["n_classes"] = d.n_classes;
            out["subject_id"] = d.subject_id;
            out["session_id"] = d.session_id;
            return out;
        },
        py::arg("path"), "Read a canonical epoched container.");

    m.def(
        "save_epoched",
        [](const std::string& path, py::array_t<float, py::array::c_style | py::array::forcecast> data,
           const std::vector<int>& labels, double fs, const std::vector<std::string>& channel_names,
           int n_classes, const std::string& subject_id, const std::string& session_id) {
            py::buffer_info info = data.request();
            if (info.ndim != 3) throw ArgumentError("data must be trials x channels x samples");
            EpochedDataset d;
            d.n_trials = int(info.shape[0]);
            d.n_channels = int(info.shape[1]);
            d.n_samples = int(info.shape[2]);
            d.labels = labels;
            d.fs = fs;
            d.channel_names = channel_names;
            d.n_classes = n_classes;
            d.subject_id = subject_id;
            d.session_id = session_id;
            const float* src = static_cast<const float*>(info.ptr);
            d.data.assign(src, src + size_t(d.n_trials) * d.n_channels * d.n_samples);
            save_container(d, path);
        },
        py::arg("path"), py::arg("data"), py::arg("labels"), py::arg("fs"),
        py::arg("channel_names"), py::arg("n_classes"), py::arg("subject_id") = "S01",
        py::arg("session_id") = "T", "Write a canonical epoched container.");

    m.attr("__version__") = "0.1.0";
}
