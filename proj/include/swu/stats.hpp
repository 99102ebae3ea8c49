#pragma once
// Paired Wilcoxon signed-rank tests (exact distribution below a crossover,
// normal approximation with tie and continuity corrections above it),
// Holm-Bonferroni step-down correction, and pairwise significance
// matrices with column sums.

#include <string>
#include <vector>

namespace swu {

// Exact enumeration is used for n (nonzero differences) <= crossover.
constexpr int kWilcoxonExactCrossover = 25;

// Two-sided p-value of the paired signed-rank test. Zero differences are
// dropped; all-zero differences give p = 1.
double wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y,
                            int exact_crossover = kWilcoxonExactCrossover);

// Step-down adjustment: sorted ascending, adjusted_(i) = max_{j<=i}
// ((m-j+1) p_(j)), clipped at 1, mapped back to input order.
std::vector<double> holm_correction(const std::vector<double>& p_values);

struct PairwiseMatrix {
    std::vector<std::string> methods;
    std::string metric;
    bool higher_better = true;
    std::vector<std::vector<int>> cells;  // cells[r][c] in {-1,0,+1}, diagonal 0
    std::vector<int> column_sums;
    std::vector<std::vector<double>> p_holm;  // adjusted p per pair (symmetric)
};

struct MethodScores {
    std::string name;
    std::vector<double> scores;  // one entry per case, cases aligned across methods
};

// Runs all C(M,2) tests, Holm-corrects them jointly within this block, and
// assigns +1 to cell (r,c) when the column method is significantly better
// than the row method. Direction comes from the median of the paired
// differences (mean as tie-break) under the metric's orientation.
PairwiseMatrix pairwise_matrix(const std::vector<MethodScores>& per_case,
                               const std::string& metric, bool higher_better,
                               double alpha = 0.05,
                               int exact_crossover = kWilcoxonExactCrossover);

}  // namespace swu
