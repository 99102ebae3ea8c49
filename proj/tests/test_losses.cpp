#include "swu/losses.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>

using namespace swu;

TEST_CASE("error indicator with the lowest-index tie convention") {
    DenseField z({1, 2, 3});
    z.at({0, 0, 0}) = 2.0f;
    z.at({0, 1, 0}) = 1.0f;
    z.at({0, 0, 1}) = 2.0f;
    z.at({0, 1, 1}) = 1.0f;
    z.at({0, 0, 2}) = 1.0f;  // exact tie -> predicted class 0
    z.at({0, 1, 2}) = 1.0f;
    LabelField y({1, 3}, 0);
    y.data = {0, 1, 1};
    DenseField e = error_indicator(z, y);
    CHECK(e.data[0] == 0.0f);
    CHECK(e.data[1] == 1.0f);
    CHECK(e.data[2] == 1.0f);  // tie predicted 0, label 1

    LabelField bad({1, 3}, 0);
    bad.data = {0, 2, 0};
    CHECK_THROWS_AS(error_indicator(z, bad), ShapeError);
}

TEST_CASE("standardize field semantics") {
    DenseField u({1, 1, 2});
    u.data = {-1.0f, 1.0f};
    DenseField s = standardize_field(u);
    CHECK(s.data[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(s.data[1] == doctest::Approx(1.0).epsilon(1e-5));

    DenseField flat({1, 1, 3}, 2.0f);
    for (float v : standardize_field(flat).data) CHECK(v == 0.0f);
}

TEST_CASE("nll loss cases") {
    // Certain correct predictions -> 0.
    DenseField z({1, 2, 2});
    z.at({0, 0, 0}) = 60.0f;
    z.at({0, 1, 1}) = 60.0f;
    LabelField y({1, 2}, 0);
    y.data = {0, 1};
    CHECK(nll_loss(z, y) == doctest::Approx(0.0).epsilon(1e-9));

    // Uniform probabilities -> log C.
    DenseField z0({1, 4, 3}, 0.0f);
    LabelField y0({1, 3}, 2);
    CHECK(nll_loss(z0, y0) == doctest::Approx(std::log(4.0)).epsilon(1e-9));

    // p_y = 0.5 at a single voxel -> ln 2.
    DenseField z1({1, 2, 1}, 0.0f);
    LabelField y1({1, 1}, 1);
    CHECK(nll_loss(z1, y1) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("ec loss cases") {
    DenseField u0({1, 1, 4}, 0.0f);
    DenseField e({1, 1, 4});
    e.data = {1.0f, 0.0f, 1.0f, 0.0f};
    CHECK(ec_loss(u0, e, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // Perfect separation in the +-inf limit drives the loss to 0.
    DenseField usep({1, 1, 4});
    usep.data = {40.0f, -40.0f, 40.0f, -40.0f};
    CHECK(ec_loss(usep, e, 1.0) < 1e-9);

    DenseField u1({1, 1, 1}, 1.0f);
    DenseField e1({1, 1, 1}, 1.0f);
    CHECK(ec_loss(u1, e1, 1.0) == doctest::Approx(0.313262).epsilon(1e-5));
}

TEST_CASE("ec loss decreases when separation grows") {
    Rng rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        DenseField u = test::random_field({1, 1, 50}, rng);
        DenseField e({1, 1, 50});
        for (size_t i = 0; i < 50; ++i) e.data[i] = rng.uniform() < 0.3 ? 1.0f : 0.0f;
        e.data[0] = 1.0f;  // ensure at least one of each
        e.data[1] = 0.0f;
        DenseField u_shift = u;
        for (size_t i = 0; i < 50; ++i)
            if (e.data[i] != 0.0f) u_shift.data[i] += 0.7f;
        CHECK(ec_loss(u_shift, e, 1.0) < ec_loss(u, e, 1.0));
    }
}

TEST_CASE("pairwise loss cases") {
    // Equal scores at zero margin -> ln 2 per pair.
    DenseField u({1, 1, 2}, 0.5f);
    DenseField e({1, 1, 2});
    e.data = {1.0f, 0.0f};
    CHECK(pairwise_loss(u, e, 0.0, 1.0, 128, 9) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // errors far above correct -> ~0.
    DenseField u2({1, 1, 2});
    u2.data = {50.0f, 0.0f};
    CHECK(pairwise_loss(u2, e, 0.0, 1.0, 128, 9) < 1e-9);

    // single pair hand value
    DenseField u3({1, 1, 2});
    u3.data = {5.0f, 1.0f};
    CHECK(pairwise_loss(u3, e, 0.0, 1.0, 16, 9) == doctest::Approx(0.018150).epsilon(1e-4));

    // degenerate populations -> 0
    DenseField all_err({1, 1, 2});
    all_err.data = {1.0f, 1.0f};
    CHECK(pairwise_loss(u3, all_err, 0.1, 1.0, 16, 9) == 0.0);
}

TEST_CASE("pairwise loss is deterministic given the seed") {
    Rng rng(72);
    DenseField u = test::random_field({1, 1, 40}, rng);
    DenseField e({1, 1, 40});
    for (size_t i = 0; i < 40; ++i) e.data[i] = rng.uniform() < 0.4 ? 1.0f : 0.0f;
    e.data[0] = 1.0f;
    e.data[1] = 0.0f;
    const double a = pairwise_loss(u, e, 0.1, 1.0, 64, 1234);
    const double b = pairwise_loss(u, e, 0.1, 1.0, 64, 1234);
    const double c = pairwise_loss(u, e, 0.1, 1.0, 64, 4321);
    CHECK(a == b);
    CHECK(a != c);  // different sample, overwhelmingly likely to differ
}

TEST_CASE("tail loss cases") {
    // All scores equal -> mean error rate.
    DenseField u({1, 1, 4}, 1.0f);
    DenseField e({1, 1, 4});
    e.data = {1.0f, 0.0f, 0.0f, 1.0f};
    CHECK(tail_loss(u, e, 1.0) == doctest::Approx(0.5).epsilon(1e-9));

    // Single voxel -> its error value.
    DenseField u1({1, 1, 1}, 3.0f);
    DenseField e1({1, 1, 1}, 1.0f);
    CHECK(tail_loss(u1, e1, 1.0) == doctest::Approx(1.0).epsilon(1e-9));

    // u = (0, 10), e = (1, 0): weight concentrates on the low-u error.
    DenseField u2({1, 1, 2});
    u2.data = {0.0f, 10.0f};
    DenseField e2({1, 1, 2});
    e2.data = {1.0f, 0.0f};
    CHECK(tail_loss(u2, e2, 1.0) == doctest::Approx(0.9999546).epsilon(1e-6));

    // Bounded in [0, 1].
    Rng rng(73);
    for (int trial = 0; trial < 10; ++trial) {
        DenseField ur = test::random_field({1, 1, 30}, rng, 4.0);
        DenseField er({1, 1, 30});
        for (size_t i = 0; i < 30; ++i) er.data[i] = rng.uniform() < 0.5 ? 1.0f : 0.0f;
        const double t = tail_loss(ur, er, 0.7);
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
    }
}

TEST_CASE("trust loss hand value") {
    DenseField d0({1, 2, 1}, 0.0f);
    DenseField z({1, 2, 1}, 0.0f);
    CHECK(trust_loss(d0, z) == doctest::Approx(0.0));

    DenseField d({1, 2, 1});
    d.at({0, 0, 0}) = static_cast<float>(std::log(2.0));
    // first term (ln 2)^2 = 0.480453; second term (1/4)*(1/18) = 0.013889
    CHECK(trust_loss(d, z) == doctest::Approx(0.4943419).epsilon(2e-6));

    Rng rng(74);
    for (int trial = 0; trial < 10; ++trial) {
        DenseField dr = test::random_field({1, 3, 7}, rng);
        DenseField zr = test::random_field({1, 3, 7}, rng);
        CHECK(trust_loss(dr, zr) >= 0.0);
    }
}

TEST_CASE("anchor consistency loss: affine invariance and branch values") {
    Rng rng(75);
    DenseField anchor = test::random_field({1, 1, 30}, rng);
    DenseField rnk({1, 1, 30});
    for (size_t i = 0; i < 30; ++i) rnk.data[i] = 2.5f * anchor.data[i] + 0.7f;
    CHECK(anchor_consistency_loss(rnk, anchor) == doctest::Approx(0.0).epsilon(1e-8));

    // Standardized difference of 0.5 per voxel -> quadratic branch 0.125.
    // Construct via direct smooth-L1 on hand vectors instead: shifted target
    // standardization makes a uniform offset vanish, so check the scalar rule
    // through the public loss with exact standardized values.
    DenseField a2({1, 1, 2});
    a2.data = {-1.0f, 1.0f};  // standardizes to (-1, 1)
    DenseField r2({1, 1, 2});
    r2.data = {1.0f, -1.0f};  // standardizes to (1, -1); |d| = 2 -> linear branch 1.5
    CHECK(anchor_consistency_loss(r2, a2) == doctest::Approx(1.5).epsilon(1e-5));
}

TEST_CASE("residual regularization") {
    DenseField w({1, 1, 1}, 1.0f);
    DenseField r({1, 1, 1}, 5.0f);
    CHECK(residual_reg_loss(w, r) == doctest::Approx(0.0));

    DenseField r0({1, 1, 1}, 0.0f);
    DenseField w2({1, 1, 1}, 0.3f);
    CHECK(residual_reg_loss(w2, r0) == doctest::Approx(0.0));

    DenseField we({1, 1, 1}, static_cast<float>(std::exp(-4.0)));
    DenseField re({1, 1, 1}, 2.0f);
    CHECK(residual_reg_loss(we, re) == doctest::Approx(1.963369).epsilon(1e-5));
}

TEST_CASE("total loss weighting") {
    std::map<std::string, double> terms = {{"nll", 1.0},  {"ec", 1.0},     {"pair", 1.0},
                                           {"tail", 1.0}, {"trust", 1.0},  {"anchor", 1.0},
                                           {"res", 1.0}};
    LossWeights w;
    CHECK(total_loss(terms, w) == doctest::Approx(1.4));

    LossWeights zero;
    zero.nll = zero.ec = zero.pair = zero.tail = zero.trust = zero.anchor = zero.res = 0.0;
    CHECK(total_loss(terms, zero) == 0.0);

    LossWeights only_nll = zero;
    only_nll.nll = 1.0;
    CHECK(total_loss(terms, only_nll) == doctest::Approx(1.0));

    LossWeights bad;
    bad.seg = 0.5;
    CHECK_THROWS_AS(total_loss(terms, bad), ConfigError);
}
