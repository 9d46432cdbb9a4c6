#include "eegkd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "eegkd/errors.hpp"

namespace eegkd::stats {

namespace {

constexpr int kSignedRankExactMax = 17;
constexpr int kRankSumExactMax = 17;

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double two_sided_from_counts(double count_le, double count_ge, double total) {
    const double p = 2.0 * std::min(count_le, count_ge) / total;
    return std::min(1.0, p);
}

// sum of (t^3 - t) over tie groups
double tie_term(const std::vector<double>& sorted) {
    double s = 0;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = double(j - i);
        s += t * t * t - t;
        i = j;
    }
    return s;
}

} // namespace

std::vector<double> midranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t(0));
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && v[idx[j]] == v[idx[i]]) ++j;
        const double rank = 0.5 * double(i + 1 + j); // average of ranks i+1 .. j
        for (size_t k = i; k < j; ++k) r[idx[k]] = rank;
        i = j;
    }
    return r;
}

TestResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ArgumentError("wilcoxon_signed_rank: length mismatch");
    if (a.empty()) throw ArgumentError("wilcoxon_signed_rank: empty input");

    std::vector<double> d;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    const int n = int(d.size());
    if (n == 0) return {0.0, 1.0, true};

    std::vector<double> mag(d.size());
    for (size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
    const auto ranks = midranks(mag);

    double t_plus = 0, t_total = 0;
    for (size_t i = 0; i < d.size(); ++i) {
        t_total += ranks[i];
        if (d[i] > 0) t_plus += ranks[i];
    }
    const double t_minus = t_total - t_plus;
    const double stat = std::min(t_plus, t_minus);

    if (n <= kSignedRankExactMax) {
        // all 2^n equally likely sign assignments
        const uint64_t total = uint64_t(1) << n;
        uint64_t le = 0, ge = 0;
        for (uint64_t mask = 0; mask < total; ++mask) {
            double t = 0;
            for (int i = 0; i < n; ++i)
                if (mask & (uint64_t(1) << i)) t += ranks[size_t(i)];
            if (t <= t_plus + 1e-12) ++le;
            if (t >= t_plus - 1e-12) ++ge;
        }
        return {stat, two_sided_from_counts(double(le), double(ge), double(total)), true};
    }

    std::vector<double> sorted_mag(mag);
    std::sort(sorted_mag.begin(), sorted_mag.end());
    const double mu = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(sorted_mag) / 48.0;
    if (var <= 0) return {stat, 1.0, false};
    // continuity correction toward the mean
    double num = t_plus - mu;
    num -= 0.5 * (num > 0 ? 1.0 : (num < 0 ? -1.0 : 0.0));
    return {stat, normal_two_sided(num / std::sqrt(var)), false};
}

TestResult wilcoxon_rank_sum(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw ArgumentError("wilcoxon_rank_sum: empty input");
    const int na = int(a.size()), nb = int(b.size()), n = na + nb;

    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);
    double w = 0;
    for (int i = 0; i < na; ++i) w += ranks[size_t(i)];

    if (n <= kRankSumExactMax) {
        // enumerate all C(n, na) assignments of ranks to the first sample
        uint64_t total = 0, le = 0, ge = 0;
        std::vector<int> comb(size_t(na), 0);
        std::iota(comb.begin(), comb.end(), 0);
        for (;;) {
            double t = 0;
            for (int i : comb) t += ranks[size_t(i)];
            ++total;
            if (t <= w + 1e-12) ++le;
            if (t >= w - 1e-12) ++ge;
            // next combination
            int k = na - 1;
            while (k >= 0 && comb[size_t(k)] == n - na + k) --k;
            if (k < 0) break;
            ++comb[size_t(k)];
            for (int j = k + 1; j < na; ++j) comb[size_t(j)] = comb[size_t(j - 1)] + 1;
        }
        return {w, two_sided_from_counts(double(le), double(ge), double(total)), true};
    }

    std::vector<double> sorted_pooled(pooled);
    std::sort(sorted_pooled.begin(), sorted_pooled.end());
    const double mu = na * (n + 1.0) / 2.0;
    const double tie = tie_term(sorted_pooled);
    const double var = double(na) * nb / 12.0 * ((n + 1.0) - tie / (double(n) * (n - 1.0)));
    if (var <= 0) return {w, 1.0, false};
    double num = w - mu;
    num -= 0.5 * (num > 0 ? 1.0 : (num < 0 ? -1.0 : 0.0));
    return {w, normal_two_sided(num / std::sqrt(var)), false};
}

} // namespace eegkd::stats
