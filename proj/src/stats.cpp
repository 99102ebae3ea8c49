#include "swu/stats.hpp"

#include "swu/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace swu {

// Ranks of |d| with average ranks for ties. Returned in the order of `d`.
static std::vector<double> abs_ranks(const std::vector<double>& d) {
    const size_t n = d.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return std::abs(d[a]) < std::abs(d[b]);
    });
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    return rank;
}

// Exact two-sided p-value by dynamic programming over sign assignments.
// Ranks may be half-integers under ties, so everything runs in doubled
// units where the rank sum is the integer n(n+1).
static double exact_p_value(const std::vector<double>& ranks, double w_plus) {
    const size_t n = ranks.size();
    int64_t total2 = 0;
    std::vector<int64_t> r2(n);
    for (size_t i = 0; i < n; ++i) {
        r2[i] = static_cast<int64_t>(std::llround(2.0 * ranks[i]));
        total2 += r2[i];
    }
    std::vector<double> count(static_cast<size_t>(total2 + 1), 0.0);
    count[0] = 1.0;
    int64_t reach = 0;
    for (size_t i = 0; i < n; ++i) {
        reach += r2[i];
        for (int64_t s = reach; s >= r2[i]; --s)
            count[static_cast<size_t>(s)] += count[static_cast<size_t>(s - r2[i])];
    }
    const double denom = std::pow(2.0, static_cast<double>(n));
    const int64_t w2 = static_cast<int64_t>(std::llround(2.0 * w_plus));
    const int64_t lo = std::min(w2, total2 - w2);
    const int64_t hi = std::max(w2, total2 - w2);
    double p = 0.0;
    for (int64_t s = 0; s <= lo; ++s) p += count[static_cast<size_t>(s)];
    for (int64_t s = hi; s <= total2; ++s) p += count[static_cast<size_t>(s)];
    return std::min(1.0, p / denom);
}

static double normal_two_sided(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y,
                            int exact_crossover) {
    if (x.size() != y.size()) throw ShapeError("wilcoxon: length mismatch");
    if (x.empty()) throw ShapeError("wilcoxon: empty input");
    std::vector<double> d;
    d.reserve(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double di = x[i] - y[i];
        if (di != 0.0) d.push_back(di);
    }
    if (d.empty()) return 1.0;
    const std::vector<double> ranks = abs_ranks(d);
    double w_plus = 0.0;
    for (size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) w_plus += ranks[i];

    const size_t n = d.size();
    if (static_cast<int>(n) <= exact_crossover) return exact_p_value(ranks, w_plus);

    // Normal approximation with tie and continuity corrections.
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    {
        std::vector<double> av(d.size());
        for (size_t i = 0; i < d.size(); ++i) av[i] = std::abs(d[i]);
        std::sort(av.begin(), av.end());
        size_t i = 0;
        while (i < av.size()) {
            size_t j = i;
            while (j + 1 < av.size() && av[j + 1] == av[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return 1.0;
    double num = w_plus - mu;
    if (num > 0.5)
        num -= 0.5;
    else if (num < -0.5)
        num += 0.5;
    else
        num = 0.0;
    return std::min(1.0, normal_two_sided(num / std::sqrt(var)));
}

std::vector<double> holm_correction(const std::vector<double>& p_values) {
    const size_t m = p_values.size();
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m, 0.0);
    double running = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const double scaled = static_cast<double>(m - i) * p_values[order[i]];
        running = std::max(running, scaled);
        adjusted[order[i]] = std::min(1.0, running);
    }
    return adjusted;
}

static double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PairwiseMatrix pairwise_matrix(const std::vector<MethodScores>& per_case,
                               const std::string& metric, bool higher_better, double alpha,
                               int exact_crossover) {
    const size_t m = per_case.size();
    if (m < 2) throw ShapeError("pairwise_matrix: need at least 2 methods");
    const size_t cases = per_case[0].scores.size();
    for (const MethodScores& ms : per_case)
        if (ms.scores.size() != cases)
            throw ShapeError("pairwise_matrix: case sets differ between methods");

    PairwiseMatrix out;
    out.metric = metric;
    out.higher_better = higher_better;
    for (const MethodScores& ms : per_case) out.methods.push_back(ms.name);
    out.cells.assign(m, std::vector<int>(m, 0));
    out.p_holm.assign(m, std::vector<double>(m, 1.0));

    std::vector<std::pair<size_t, size_t>> pairs;
    std::vector<double> raw_p;
    for (size_t r = 0; r < m; ++r)
        for (size_t c = r + 1; c < m; ++c) {
            pairs.emplace_back(r, c);
            raw_p.push_back(
                wilcoxon_signed_rank(per_case[r].scores, per_case[c].scores, exact_crossover));
        }
    const std::vector<double> p_adj = holm_correction(raw_p);

    for (size_t k = 0; k < pairs.size(); ++k) {
        const auto [r, c] = pairs[k];
        out.p_holm[r][c] = out.p_holm[c][r] = p_adj[k];
        if (p_adj[k] > alpha) continue;
        std::vector<double> diff(cases);
        double mean = 0.0;
        for (size_t i = 0; i < cases; ++i) {
            diff[i] = per_case[c].scores[i] - per_case[r].scores[i];
            mean += diff[i];
        }
        mean /= static_cast<double>(cases);
        double direction = median_of(diff);
        if (direction == 0.0) direction = mean;
        if (direction == 0.0) continue;
        const bool column_better = higher_better ? direction > 0.0 : direction < 0.0;
        out.cells[r][c] = column_better ? +1 : -1;
        out.cells[c][r] = -out.cells[r][c];
    }

    out.column_sums.assign(m, 0);
    for (size_t c = 0; c < m; ++c)
        for (size_t r = 0; r < m; ++r) out.column_sums[c] += out.cells[r][c];
    return out;
}

}  // namespace swu
