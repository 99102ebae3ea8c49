#include "swu/stats.hpp"

#include "swu/field.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>

using namespace swu;

TEST_CASE("wilcoxon hand cases") {
    CHECK(wilcoxon_signed_rank({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
    // n = 3, all positive, no ties -> p = 2/8.
    CHECK(wilcoxon_signed_rank({2, 3, 4}, {1, 1, 1}) == doctest::Approx(0.25));
    // n = 5, all positive -> p = 2/32.
    CHECK(wilcoxon_signed_rank({2, 3, 4, 5, 7}, {1, 1, 1, 1, 1}) == doctest::Approx(0.0625));
}

TEST_CASE("exact wilcoxon matches full enumeration for n <= 12") {
    Rng rng(101);
    for (int trial = 0; trial < 60; ++trial) {
        const size_t n = 2 + rng.uniform_index(11);
        std::vector<double> x(n), y(n);
        for (size_t i = 0; i < n; ++i) {
            // Quantize to force ties (both between |d| and at zero).
            x[i] = std::round(rng.normal() * 2.0) / 2.0;
            y[i] = std::round(rng.normal() * 2.0) / 2.0;
        }
        const double expect = test::wilcoxon_enumeration(x, y);
        const double got = wilcoxon_signed_rank(x, y);
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("n=10 critical value: W <= 8 iff two-sided exact p <= 0.05") {
    // Construct difference sets with all distinct magnitudes and a chosen
    // W+ by assigning signs; verify the published critical value.
    for (int target_w = 0; target_w <= 14; ++target_w) {
        std::vector<double> x(10), y(10, 0.0);
        // Magnitudes 1..10; make a subset positive so ranks sum to target.
        int remaining = target_w;
        for (int i = 10; i >= 1; --i) {
            if (remaining >= i) {
                x[static_cast<size_t>(i - 1)] = i;
                remaining -= i;
            } else {
                x[static_cast<size_t>(i - 1)] = -i;
            }
        }
        REQUIRE(remaining == 0);
        const double p = wilcoxon_signed_rank(x, y);
        if (target_w <= 8)
            CHECK(p <= 0.05);
        else
            CHECK(p > 0.05);
    }
}

TEST_CASE("normal approximation is close to exact near the crossover") {
    Rng rng(102);
    for (int trial = 0; trial < 10; ++trial) {
        const size_t n = 22;
        std::vector<double> x(n), y(n, 0.0);
        for (size_t i = 0; i < n; ++i) x[i] = rng.normal();
        const double exact = wilcoxon_signed_rank(x, y, 25);
        const double approx = wilcoxon_signed_rank(x, y, 5);
        CHECK(std::abs(exact - approx) < 0.02);
    }
}

TEST_CASE("holm correction hand case and properties") {
    auto adj = holm_correction({0.01, 0.04, 0.03});
    CHECK(adj[0] == doctest::Approx(0.03));
    CHECK(adj[1] == doctest::Approx(0.06));
    CHECK(adj[2] == doctest::Approx(0.06));

    CHECK(holm_correction({0.2})[0] == doctest::Approx(0.2));
    for (double p : holm_correction({1.0, 1.0, 1.0})) CHECK(p == doctest::Approx(1.0));

    Rng rng(103);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> p(8);
        for (double& v : p) v = rng.uniform();
        auto a = holm_correction(p);
        std::vector<size_t> order(p.size());
        for (size_t i = 0; i < p.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return p[i] < p[j]; });
        for (size_t i = 0; i < p.size(); ++i) {
            CHECK(a[i] >= p[i]);  // adjusted >= raw
            if (i + 1 < p.size())
                CHECK(a[order[i]] <= a[order[i + 1]] + 1e-15);  // monotone in sorted order
        }
    }
}

TEST_CASE("pairwise matrix: identical methods give all zeros") {
    std::vector<MethodScores> ms;
    std::vector<double> s = {0.9, 0.8, 0.85, 0.95, 0.7, 0.75, 0.8, 0.9, 0.84, 0.88};
    ms.push_back({"a", s});
    ms.push_back({"b", s});
    ms.push_back({"c", s});
    PairwiseMatrix m = pairwise_matrix(ms, "dice", true);
    for (const auto& row : m.cells)
        for (int v : row) CHECK(v == 0);
    for (int v : m.column_sums) CHECK(v == 0);
}

TEST_CASE("pairwise matrix: dominant method wins both comparisons") {
    Rng rng(104);
    std::vector<double> base(30);
    for (double& v : base) v = rng.uniform(0.5, 0.6);
    std::vector<double> better(30), worse(30);
    for (size_t i = 0; i < 30; ++i) {
        better[i] = base[i] + 0.2 + 0.01 * rng.uniform();
        worse[i] = base[i] - 0.05 - 0.01 * rng.uniform();
    }
    std::vector<MethodScores> ms = {{"a", better}, {"b", base}, {"c", worse}};
    PairwiseMatrix m = pairwise_matrix(ms, "auroc", true);
    CHECK(m.cells[1][0] == 1);   // a better than b
    CHECK(m.cells[0][1] == -1);
    CHECK(m.cells[2][0] == 1);   // a better than c
    CHECK(m.column_sums[0] == 2);
    CHECK(m.column_sums[2] < 0);

    // Antisymmetry always.
    for (size_t r = 0; r < 3; ++r)
        for (size_t c = 0; c < 3; ++c) CHECK(m.cells[r][c] == -m.cells[c][r]);
}

TEST_CASE("pairwise matrix respects direction for lower-is-better metrics") {
    Rng rng(105);
    std::vector<double> low(25), high(25);
    for (size_t i = 0; i < 25; ++i) {
        low[i] = 0.1 + 0.01 * rng.uniform();
        high[i] = 0.5 + 0.01 * rng.uniform();
    }
    std::vector<MethodScores> ms = {{"good", low}, {"bad", high}};
    PairwiseMatrix m = pairwise_matrix(ms, "aurc", false);
    CHECK(m.cells[1][0] == 1);  // column "good" significantly better than row "bad"
    CHECK(m.cells[0][1] == -1);
}

TEST_CASE("pairwise matrix rejects mismatched case sets") {
    std::vector<MethodScores> ms = {{"a", {1, 2, 3}}, {"b", {1, 2}}};
    CHECK_THROWS_AS(pairwise_matrix(ms, "dice", true), ShapeError);
}
