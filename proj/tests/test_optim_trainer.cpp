#include "swu/trainer.hpp"

#include "swu/synth.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>

using namespace swu;

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(cosine_lr(0, 200, 1e-3, 3e-4) == doctest::Approx(1e-3));
    CHECK(cosine_lr(200, 200, 1e-3, 3e-4) == doctest::Approx(3e-4));
    CHECK(cosine_lr(100, 200, 1e-3, 3e-4) == doctest::Approx(6.5e-4));
}

TEST_CASE("gradient clipping") {
    GradStore g;
    g["a"] = Tensor({2}, 0.0);
    g["a"].v = {3.0, 4.0};  // norm 5
    GradStore g1 = g;
    CHECK(clip_gradients(g1, 12.0) == doctest::Approx(5.0));
    CHECK(g1["a"].v == g["a"].v);  // unchanged below the threshold

    GradStore g2;
    g2["a"] = Tensor({1}, 24.0);
    clip_gradients(g2, 12.0);
    CHECK(g2["a"].v[0] == doctest::Approx(12.0));  // halved

    Rng rng(111);
    GradStore g3;
    g3["w"] = Tensor({64}, 0.0);
    for (double& v : g3["w"].v) v = 10.0 * rng.normal();
    clip_gradients(g3, 12.0);
    double sq = 0.0;
    for (double v : g3["w"].v) sq += v * v;
    CHECK(std::sqrt(sq) <= 12.0 + 1e-6);
}

TEST_CASE("adamw single-step hand cases") {
    OptimSettings s;
    s.weight_decay = 0.0;
    AdamW opt(s);
    ParamStore p;
    p["x"] = Tensor({1}, 1.0);
    GradStore g;
    g["x"] = Tensor({1}, 1.0);
    opt.step(p, g, 0.1);
    CHECK(p["x"].v[0] == doctest::Approx(0.9).epsilon(1e-7));

    // Zero gradient, zero decay: unchanged.
    OptimSettings s2;
    s2.weight_decay = 0.0;
    AdamW opt2(s2);
    ParamStore p2;
    p2["x"] = Tensor({1}, 0.7);
    GradStore g2;
    g2["x"] = Tensor({1}, 0.0);
    opt2.step(p2, g2, 0.1);
    CHECK(p2["x"].v[0] == doctest::Approx(0.7));

    // Decay only.
    OptimSettings s3;
    s3.weight_decay = 0.01;
    AdamW opt3(s3);
    ParamStore p3;
    p3["x"] = Tensor({1}, 1.0);
    GradStore g3;
    g3["x"] = Tensor({1}, 0.0);
    opt3.step(p3, g3, 0.1);
    CHECK(p3["x"].v[0] == doctest::Approx(0.999));
}

TEST_CASE("adamw rejects shape mismatches") {
    AdamW opt(OptimSettings{});
    ParamStore p;
    p["x"] = Tensor({2}, 1.0);
    GradStore g;
    g["x"] = Tensor({3}, 1.0);
    CHECK_THROWS_AS(opt.step(p, g, 0.1), ShapeError);
}

namespace {

SynthConfig tiny_synth() {
    SynthConfig cfg;
    cfg.extents = {16, 16};
    cfg.tap_channels = {6, 4};
    cfg.seed = 77;
    return cfg;
}

TrainConfig tiny_train() {
    TrainConfig cfg;
    cfg.max_epochs = 4;
    cfg.early_stop_tolerance = 2;
    cfg.seed = 13;
    cfg.head.probes = 3;
    cfg.head.target_channels = 6;
    cfg.hyper.k_pairs = 256;
    return cfg;
}

}  // namespace

TEST_CASE("training is deterministic and the loop runs end to end") {
    SynthConfig sc = tiny_synth();
    auto train_cases = generate_split(sc, 6, "train");
    auto val_cases = generate_split(sc, 3, "val");
    TrainConfig tc = tiny_train();

    TrainResult r1 = train_head(train_cases, val_cases, tc);
    TrainResult r2 = train_head(train_cases, val_cases, tc);
    REQUIRE(r1.history.epochs.size() == r2.history.epochs.size());
    CHECK(r1.history.initial_val_score == r2.history.initial_val_score);
    for (size_t i = 0; i < r1.history.epochs.size(); ++i) {
        CHECK(r1.history.epochs[i].total_loss == r2.history.epochs[i].total_loss);
        CHECK(r1.history.epochs[i].val_score == r2.history.epochs[i].val_score);
    }
    for (const auto& [name, t] : r1.params) CHECK(t.v == r2.params.at(name).v);
    CHECK(r1.history.best_epoch <= static_cast<int>(r1.history.epochs.size()));
}

TEST_CASE("zero-weight objective leaves parameters unchanged and stops early") {
    SynthConfig sc = tiny_synth();
    auto train_cases = generate_split(sc, 3, "train");
    auto val_cases = generate_split(sc, 2, "val");
    TrainConfig tc = tiny_train();
    tc.max_epochs = 10;
    tc.weights.nll = tc.weights.ec = tc.weights.pair = 0.0;
    tc.weights.tail = tc.weights.trust = tc.weights.anchor = tc.weights.res = 0.0;
    TrainResult r = train_head(train_cases, val_cases, tc);
    for (const auto& [name, t] : r.params) {
        const Tensor& t0 = r.initial_params.at(name);
        CHECK(t.v == t0.v);
    }
    // Val score never improves, so the loop stops after the tolerance.
    CHECK(static_cast<int>(r.history.epochs.size()) == tc.early_stop_tolerance);
    CHECK(r.history.best_epoch == 0);
}

TEST_CASE("training improves the validation score on the synthetic task") {
    SynthConfig sc = tiny_synth();
    auto train_cases = generate_split(sc, 12, "train");
    auto val_cases = generate_split(sc, 6, "val");
    TrainConfig tc = tiny_train();
    tc.max_epochs = 30;
    tc.early_stop_tolerance = 8;
    TrainResult r = train_head(train_cases, val_cases, tc);
    CHECK(r.history.best_val_score < r.history.initial_val_score);
    CHECK(r.history.best_epoch >= 1);
}

TEST_CASE("non-finite loss aborts with a numeric error") {
    SynthConfig sc = tiny_synth();
    auto train_cases = generate_split(sc, 2, "train");
    auto val_cases = generate_split(sc, 2, "val");
    // Poison a logit so the forward bundle rejects it.
    train_cases[0].logits.data[5] = std::numeric_limits<float>::quiet_NaN();
    TrainConfig tc = tiny_train();
    CHECK_THROWS_AS(train_head(train_cases, val_cases, tc), NumericError);
}

TEST_CASE("empty splits are rejected") {
    SynthConfig sc = tiny_synth();
    auto cases = generate_split(sc, 2, "train");
    TrainConfig tc = tiny_train();
    CHECK_THROWS_AS(train_head({}, cases, tc), ConfigError);
    CHECK_THROWS_AS(train_head(cases, {}, tc), ConfigError);
}
