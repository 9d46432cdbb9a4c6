#pragma once

#include <vector>

namespace eegkd::stats {

struct TestResult {
    double statistic;
    double p_value;
    bool exact; // enumeration (true) or normal approximation
};

// Paired two-sided test. Zero differences are dropped; if none remain the
// result is p == 1. Exact enumeration of all sign assignments (midranks for
// tied magnitudes) up to n <= 17, tie-corrected normal approximation with
// continuity correction above; the cutoff is where the approximation first
// agrees with enumeration to within 0.01 everywhere. Statistic is min(T+, T-).
TestResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

// Unpaired two-sided test on midranks. Exact enumeration of all C(m+n, n)
// group assignments for m + n <= 17, normal approximation with tie
// correction above. Statistic is the rank sum of the first sample.
TestResult wilcoxon_rank_sum(const std::vector<double>& a, const std::vector<double>& b);

// Midranks of v (average rank for ties), ranks starting at 1.
std::vector<double> midranks(const std::vector<double>& v);

} // namespace eegkd::stats
