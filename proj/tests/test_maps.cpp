#include "swu/maps.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>

using namespace swu;

TEST_CASE("margin map basics") {
    DenseField p({1, 3, 3});
    // voxel 0: one-hot; voxel 1: uniform; voxel 2: (0.5, 0.3, 0.2)
    p.at({0, 0, 0}) = 1.0f;
    for (int c = 0; c < 3; ++c) p.at({0, c, 1}) = 1.0f / 3.0f;
    p.at({0, 0, 2}) = 0.5f;
    p.at({0, 1, 2}) = 0.3f;
    p.at({0, 2, 2}) = 0.2f;
    DenseField m = margin_map(p);
    CHECK(m.data[0] == doctest::Approx(1.0));
    CHECK(m.data[1] == doctest::Approx(0.0));
    CHECK(m.data[2] == doctest::Approx(0.2));
}

TEST_CASE("ambiguity weight") {
    DenseField m({1, 1, 2});
    m.data = {0.0f, 1.0f};
    DenseField w = ambiguity_weight(m, 4.0);
    CHECK(w.data[0] == doctest::Approx(1.0));
    CHECK(w.data[1] == doctest::Approx(0.018316).epsilon(1e-4));

    // monotone decreasing in m
    DenseField grid({1, 1, 5});
    grid.data = {0.0f, 0.25f, 0.5f, 0.75f, 1.0f};
    DenseField wg = ambiguity_weight(grid, 2.5);
    for (int i = 1; i < 5; ++i)
        CHECK(wg.data[static_cast<size_t>(i)] < wg.data[static_cast<size_t>(i - 1)]);
}

TEST_CASE("aleatoric map") {
    Rng rng(61);
    DenseField h = test::random_field({1, 3, 4}, rng);
    LinearParams zero{Tensor({1, 3}, 0.0), Tensor({1}, 0.0)};
    DenseField u = aleatoric_map(h, zero);
    for (float v : u.data) CHECK(v == doctest::Approx(std::log(2.0)));

    LinearParams low{Tensor({1, 3}, 0.0), Tensor({1}, -20.0)};
    DenseField ul = aleatoric_map(h, low);
    for (float v : ul.data) {
        CHECK(v == doctest::Approx(2.06e-9).epsilon(1e-2));
        CHECK(v > 0.0f);
    }
}

TEST_CASE("calibration map width checking and ln2 cases") {
    Rng rng(62);
    DenseField u_epi = test::positive_field({1, 1, 4}, rng, 0.0);
    DenseField u_res = u_epi;
    DenseField m({1, 1, 4}, 0.0f);
    for (size_t i = 0; i < u_epi.data.size(); ++i) {
        u_epi.data[i] = 0.0f;
        u_res.data[i] = 0.0f;
    }

    LinearParams cal3{Tensor({1, 3}, 0.0), Tensor({1}, 0.0)};
    cal3.w.v = {1.0, 1.0, 1.0};
    DenseField u_ale({1, 1, 4}, 0.0f);
    DenseField u = calibration_map(u_epi, u_res, &u_ale, m, cal3);
    for (float v : u.data) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    LinearParams cal2{Tensor({1, 2}, 0.0), Tensor({1}, 0.0)};
    DenseField u2 = calibration_map(u_epi, u_res, nullptr, m, cal2);
    for (float v : u2.data) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    // wrong width for the aleatoric flag
    CHECK_THROWS_AS(calibration_map(u_epi, u_res, &u_ale, m, cal2), ShapeError);
    CHECK_THROWS_AS(calibration_map(u_epi, u_res, nullptr, m, cal3), ShapeError);

    // positivity for random parameters
    LinearParams calr{Tensor({1, 2}, 0.0), Tensor({1}, 0.0)};
    for (double& v : calr.w.v) v = rng.normal();
    calr.b.v[0] = rng.normal();
    DenseField ur = calibration_map(test::positive_field({1, 1, 4}, rng),
                                    test::positive_field({1, 1, 4}, rng), nullptr, m, calr);
    for (float v : ur.data) CHECK(v > 0.0f);
}

TEST_CASE("temper logits: direct case and argmax preservation") {
    DenseField z({1, 2, 1});
    z.at({0, 0, 0}) = 4.0f;
    z.at({0, 1, 0}) = 2.0f;
    DenseField u({1, 1, 1}, 3.0f);
    DenseField zt = temper_logits(z, u);
    CHECK(zt.at({0, 0, 0}) == doctest::Approx(2.0));
    CHECK(zt.at({0, 1, 0}) == doctest::Approx(1.0));

    DenseField u0({1, 1, 1}, 0.0f);
    DenseField same = temper_logits(z, u0);
    CHECK(same.at({0, 0, 0}) == 4.0f);

    Rng rng(63);
    for (int trial = 0; trial < 50; ++trial) {
        DenseField zr = test::random_field({1, 4, 6}, rng, 3.0);
        DenseField ur = test::positive_field({1, 1, 6}, rng, 2.0);
        LabelField before = argmax_channel(zr);
        LabelField after = argmax_channel(temper_logits(zr, ur));
        for (size_t i = 0; i < before.data.size(); ++i) CHECK(before.data[i] == after.data[i]);
    }
}

TEST_CASE("entropy map") {
    DenseField p({1, 2, 2});
    p.at({0, 0, 0}) = 1.0f;  // one-hot
    p.at({0, 0, 1}) = 0.5f;
    p.at({0, 1, 1}) = 0.5f;
    DenseField h = entropy_map(p);
    CHECK(h.data[0] == doctest::Approx(0.0));
    CHECK(h.data[1] == doctest::Approx(std::log(2.0)));

    DenseField u({1, 4, 1}, 0.25f);
    CHECK(entropy_map(u).data[0] == doctest::Approx(std::log(4.0)).epsilon(1e-6));
}

TEST_CASE("anchor map hand values and monotonicity") {
    auto anchor_scalar = [](double epi, double res, double cal, double h, double w, int c) {
        DenseField fe({1, 1, 1}, static_cast<float>(epi));
        DenseField fr({1, 1, 1}, static_cast<float>(res));
        DenseField fc({1, 1, 1}, static_cast<float>(cal));
        DenseField fh({1, 1, 1}, static_cast<float>(h));
        DenseField fw({1, 1, 1}, static_cast<float>(w));
        return static_cast<double>(anchor_map(fe, fr, fc, fh, fw, c).data[0]);
    };
    CHECK(anchor_scalar(0, 0, 0, 0, 1.0, 3) == doctest::Approx(1.0));
    CHECK(anchor_scalar(std::exp(1.0) - 1.0, 0, 0, 0, std::exp(-4.0), 3) ==
          doctest::Approx(1.018316).epsilon(1e-5));
    // monotone nondecreasing in each uncertainty input
    const double base = anchor_scalar(0.2, 0.3, 0.4, 0.5, 0.6, 4);
    CHECK(anchor_scalar(0.3, 0.3, 0.4, 0.5, 0.6, 4) >= base);
    CHECK(anchor_scalar(0.2, 0.4, 0.4, 0.5, 0.6, 4) >= base);
    CHECK(anchor_scalar(0.2, 0.3, 0.5, 0.5, 0.6, 4) >= base);
    CHECK(anchor_scalar(0.2, 0.3, 0.4, 0.6, 0.6, 4) >= base);
}

TEST_CASE("ranking map hand values and anchor monotonicity") {
    DenseField anchor({1, 1, 1}, 1.0f);
    DenseField w({1, 1, 1}, 1.0f);
    CHECK(ranking_map(anchor, w, 0.0, 0.0, 0.0).data[0] ==
          doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-6));
    CHECK(ranking_map(anchor, w, 0.0, 0.5, 0.0).data[0] ==
          doctest::Approx(2.193147).epsilon(1e-6));
    // a -> +inf: slope approaches 1.1
    DenseField w0({1, 1, 1}, 0.0f);
    CHECK(ranking_map(anchor, w0, 60.0, 0.0, -60.0).data[0] == doctest::Approx(1.1).epsilon(1e-6));

    // strictly increasing in the anchor for any a (slope in (0.9, 1.1))
    Rng rng(64);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = rng.normal() * 10.0;
        const double slope = 1.0 + 0.1 * std::tanh(a);
        // tanh saturates to +-1 in double precision for |a| > ~19.
        CHECK(slope >= 0.9);
        CHECK(slope <= 1.1);
        DenseField a1({1, 1, 1}, 1.0f), a2({1, 1, 1}, 2.0f);
        const double r1 = ranking_map(a1, w0, a, 0.3, 0.2).data[0];
        const double r2 = ranking_map(a2, w0, a, 0.3, 0.2).data[0];
        CHECK(r2 > r1);
    }
}
