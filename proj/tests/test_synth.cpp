#include "swu/synth.hpp"

#include "swu/losses.hpp"

#include <doctest.h>

#include <cmath>

using namespace swu;

namespace {

// Chebyshev distance <= radius to any differently-labeled voxel (2D).
std::vector<uint8_t> near_boundary_mask(const LabelField& labels, const Shape& extents,
                                        int radius) {
    const int64_t h = extents[0], w = extents[1];
    std::vector<uint8_t> near(static_cast<size_t>(h * w), 0);
    for (int64_t r = 0; r < h; ++r)
        for (int64_t c = 0; c < w; ++c) {
            const int32_t own = labels.data[static_cast<size_t>(r * w + c)];
            bool found = false;
            for (int64_t dr = -radius; dr <= radius && !found; ++dr)
                for (int64_t dc = -radius; dc <= radius && !found; ++dc) {
                    const int64_t rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                    if (labels.data[static_cast<size_t>(rr * w + cc)] != own) found = true;
                }
            near[static_cast<size_t>(r * w + c)] = found ? 1 : 0;
        }
    return near;
}

}  // namespace

TEST_CASE("generation is bit-identical for the same config and index") {
    SynthConfig cfg;
    SynthCase a = generate_case(cfg, 12345);
    SynthCase b = generate_case(cfg, 12345);
    CHECK(a.logits.data == b.logits.data);
    CHECK(a.labels.data == b.labels.data);
    REQUIRE(a.taps.size() == b.taps.size());
    for (size_t k = 0; k < a.taps.size(); ++k) CHECK(a.taps[k].data == b.taps[k].data);

    SynthCase c = generate_case(cfg, 12346);
    CHECK(a.logits.data != c.logits.data);
}

TEST_CASE("zero noise gives a zero error rate") {
    SynthConfig cfg;
    cfg.noise_level = 0.0;
    for (int i = 0; i < 5; ++i) {
        SynthCase cs = generate_case(cfg, i);
        DenseField e = error_indicator(cs.logits, cs.labels);
        for (float v : e.data) CHECK(v == 0.0f);
    }
}

TEST_CASE("default noise: error rate in range and boundary-concentrated") {
    SynthConfig cfg;
    int64_t total = 0, errors = 0;
    int64_t near_n = 0, near_err = 0, far_n = 0, far_err = 0;
    int nondegenerate = 0;
    const int cases = 100;
    for (int i = 0; i < cases; ++i) {
        SynthCase cs = generate_case(cfg, 4000 + i);
        DenseField e = error_indicator(cs.logits, cs.labels);
        const auto near = near_boundary_mask(cs.labels, cfg.extents, 2);
        bool any_err = false, any_ok = false;
        for (size_t j = 0; j < e.data.size(); ++j) {
            const bool err = e.data[j] != 0.0f;
            ++total;
            errors += err;
            (err ? any_err : any_ok) = true;
            if (near[j]) {
                ++near_n;
                near_err += err;
            } else {
                ++far_n;
                far_err += err;
            }
        }
        nondegenerate += (any_err && any_ok) ? 1 : 0;
    }
    const double rate = static_cast<double>(errors) / static_cast<double>(total);
    INFO("error rate ", rate);
    CHECK(rate >= 0.02);
    CHECK(rate <= 0.25);
    CHECK(nondegenerate == cases);  // AUROC defined on every case

    REQUIRE(near_n > 0);
    REQUIRE(far_n > 0);
    const double near_rate = static_cast<double>(near_err) / static_cast<double>(near_n);
    const double far_rate = static_cast<double>(far_err) / static_cast<double>(far_n);
    INFO("near rate ", near_rate, " far rate ", far_rate);
    if (far_err > 0)
        CHECK(near_rate >= 3.0 * far_rate);
    else
        CHECK(near_err > 0);
}

TEST_CASE("split streams are disjoint and reproducible") {
    SynthConfig cfg;
    auto train = generate_split(cfg, 3, "train");
    auto val = generate_split(cfg, 3, "val");
    auto test_cases = generate_split(cfg, 3, "test");
    REQUIRE(train.size() == 3);
    for (const auto& a : train)
        for (const auto& b : val) CHECK(a.id != b.id);
    for (const auto& a : val)
        for (const auto& b : test_cases) CHECK(a.id != b.id);

    auto train2 = generate_split(cfg, 3, "train");
    for (size_t i = 0; i < 3; ++i) CHECK(train[i].logits.data == train2[i].logits.data);

    CHECK(generate_split(cfg, 0, "train").empty());
    CHECK_THROWS_AS(generate_split(cfg, 1, "bogus"), ConfigError);
}

TEST_CASE("tap geometry follows strides and channel widths") {
    SynthConfig cfg;
    SynthCase cs = generate_case(cfg, 0);
    REQUIRE(cs.taps.size() == 2);
    CHECK(cs.taps[0].shape == Shape{1, 16, 32, 32});
    CHECK(cs.taps[1].shape == Shape{1, 8, 16, 16});
    CHECK(cs.logits.shape == Shape{1, 3, 32, 32});
    CHECK(cs.labels.shape == Shape{1, 32, 32});
}
