#include "swu/checkpoint.hpp"
#include "swu/tensor_io.hpp"

#include "swu/synth.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace swu;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("swu_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("tensor round trip is bit exact") {
    TempDir tmp;
    Rng rng(121);
    DenseField f = test::random_field({2, 3, 4, 5}, rng);
    const std::string path = (tmp.path / "f.swut").string();
    write_tensor(path, f);
    DenseField g = read_field(path);
    CHECK(g.shape == f.shape);
    CHECK(g.data == f.data);

    LabelField l = test::random_labels({2, 4, 5}, 7, rng);
    const std::string lpath = (tmp.path / "l.swut").string();
    write_tensor(lpath, l);
    LabelField m = read_labels(lpath);
    CHECK(m.shape == l.shape);
    CHECK(m.data == l.data);
}

TEST_CASE("malformed tensor files are rejected") {
    TempDir tmp;
    Rng rng(122);
    DenseField f = test::random_field({1, 2, 3}, rng);
    const std::string path = (tmp.path / "f.swut").string();
    write_tensor(path, f);

    SUBCASE("corrupted magic") {
        std::fstream fsr(path, std::ios::in | std::ios::out | std::ios::binary);
        fsr.seekp(0);
        fsr.write("XXXX", 4);
        fsr.close();
        CHECK_THROWS_AS(read_tensor(path), IoError);
    }
    SUBCASE("truncated payload") {
        const auto size = fs::file_size(path);
        fs::resize_file(path, size - 5);
        CHECK_THROWS_AS(read_tensor(path), IoError);
    }
    SUBCASE("trailing junk") {
        std::ofstream os(path, std::ios::app | std::ios::binary);
        os.write("zz", 2);
        os.close();
        CHECK_THROWS_AS(read_tensor(path), IoError);
    }
    SUBCASE("wrong dtype read") { CHECK_THROWS_AS(read_labels(path), IoError); }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_tensor((tmp.path / "no.swut").string()), IoError); }
}

TEST_CASE("run config defaults and strict key checking") {
    RunConfig cfg = parse_run_config("{\"version\":1}");
    CHECK(cfg.train.optim.lr_max == doctest::Approx(1e-3));
    CHECK(cfg.train.optim.lr_min == doctest::Approx(3e-4));
    CHECK(cfg.train.optim.clip_norm == doctest::Approx(12.0));
    CHECK(cfg.train.max_epochs == 200);
    CHECK(cfg.train.early_stop_tolerance == 10);
    CHECK(cfg.train.weights.nll == doctest::Approx(0.5));
    CHECK(cfg.train.weights.ec == doctest::Approx(0.25));
    CHECK(cfg.train.weights.trust == doctest::Approx(0.05));
    CHECK(cfg.train.weights.seg == 0.0);
    CHECK(cfg.train.head.probes == 8);
    CHECK(cfg.train.head.sigma_init == doctest::Approx(0.1));
    CHECK(cfg.train.head.gamma == doctest::Approx(4.0));
    CHECK(cfg.train.head.target_channels == 32);
    CHECK(cfg.train.head.aleatoric);

    CHECK_THROWS_AS(parse_run_config("{\"version\":1,\"bogus\":3}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"train\":{\"bogus\":3}}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"version\":2}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"loss_weights\":{\"seg\":0.5}}"), ConfigError);
    CHECK_THROWS_AS(
        parse_run_config("{\"head\":{\"calibration_only\":true,\"ranking_only\":true}}"),
        ConfigError);

    // Round trip through the emitter.
    RunConfig cfg2 = parse_run_config(run_config_to_json(cfg));
    CHECK(cfg2.train.weights.pair == cfg.train.weights.pair);
    CHECK(cfg2.synth.extents == cfg.synth.extents);
}

TEST_CASE("case save/load round trip") {
    TempDir tmp;
    SynthConfig sc;
    sc.extents = {8, 8};
    sc.tap_channels = {4, 3};
    auto cases = generate_split(sc, 3, "val");
    save_cases(tmp.path.string(), "val", cases);
    auto loaded = load_cases(tmp.path.string(), "val");
    REQUIRE(loaded.size() == cases.size());
    for (size_t i = 0; i < cases.size(); ++i) {
        CHECK(loaded[i].id == cases[i].id);
        CHECK(loaded[i].logits.data == cases[i].logits.data);
        CHECK(loaded[i].labels.data == cases[i].labels.data);
        REQUIRE(loaded[i].taps.size() == cases[i].taps.size());
        for (size_t k = 0; k < cases[i].taps.size(); ++k)
            CHECK(loaded[i].taps[k].data == cases[i].taps[k].data);
    }
}

TEST_CASE("checkpoint round trip reproduces bundles exactly") {
    TempDir tmp;
    SynthConfig sc;
    sc.extents = {8, 8};
    sc.tap_channels = {4, 3};
    sc.seed = 5;
    auto train_cases = generate_split(sc, 3, "train");
    auto val_cases = generate_split(sc, 2, "val");

    RunConfig rc = default_run_config();
    rc.synth = sc;
    rc.train.max_epochs = 2;
    rc.train.early_stop_tolerance = 1;
    rc.train.head.probes = 2;
    rc.train.head.target_channels = 4;
    rc.train.hyper.k_pairs = 64;

    TrainResult tr = train_head(train_cases, val_cases, rc.train);
    save_checkpoint(tmp.path.string(), tr.params, rc, tr.history);
    Checkpoint ck = load_checkpoint(tmp.path.string());

    CHECK(ck.best_epoch == tr.history.best_epoch);
    for (const auto& [name, t] : tr.params) {
        REQUIRE(ck.params.count(name) == 1);
        CHECK(ck.params.at(name).v == t.v);  // float32-rounded params reload exactly
    }

    UncertaintyBundle direct = infer_bundle(val_cases[0], tr.params, rc.train.head);
    UncertaintyBundle reloaded = infer_bundle(val_cases[0], ck.params, ck.config.train.head);
    CHECK(direct.u_rnk.data == reloaded.u_rnk.data);
    CHECK(direct.u_cal.data == reloaded.u_cal.data);
    CHECK(direct.tempered_logits.data == reloaded.tempered_logits.data);
}
