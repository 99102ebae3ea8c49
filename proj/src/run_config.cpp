#include "swu/run_config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace swu {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& section) {
    if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("bad value type for config key '") + key + "'");
        }
    }
}

void parse_synth(const json& j, SynthConfig& cfg) {
    reject_unknown(j, {"extents", "num_classes", "tap_channels", "tap_strides", "noise_level",
                       "blur_radius", "cases_train", "cases_val", "cases_test", "seed"},
                   "synth");
    get_if(j, "extents", cfg.extents);
    get_if(j, "num_classes", cfg.num_classes);
    get_if(j, "tap_channels", cfg.tap_channels);
    get_if(j, "tap_strides", cfg.tap_strides);
    get_if(j, "noise_level", cfg.noise_level);
    get_if(j, "blur_radius", cfg.blur_radius);
    get_if(j, "cases_train", cfg.cases_train);
    get_if(j, "cases_val", cfg.cases_val);
    get_if(j, "cases_test", cfg.cases_test);
    get_if(j, "seed", cfg.seed);
}

void parse_head(const json& j, HeadConfig& cfg) {
    reject_unknown(j, {"probes", "sigma_init", "epsilon", "gamma", "target_channels", "aleatoric",
                       "calibration_only", "ranking_only", "direct_head", "fixed_sigma",
                       "single_tap"},
                   "head");
    get_if(j, "probes", cfg.probes);
    get_if(j, "sigma_init", cfg.sigma_init);
    get_if(j, "epsilon", cfg.epsilon);
    get_if(j, "gamma", cfg.gamma);
    get_if(j, "target_channels", cfg.target_channels);
    get_if(j, "aleatoric", cfg.aleatoric);
    bool calibration_only = false, ranking_only = false;
    get_if(j, "calibration_only", calibration_only);
    get_if(j, "ranking_only", ranking_only);
    if (calibration_only && ranking_only)
        throw ConfigError("head: calibration_only and ranking_only are mutually exclusive");
    cfg.ranking = !calibration_only;
    cfg.calibration = !ranking_only;
    get_if(j, "direct_head", cfg.direct_head);
    get_if(j, "fixed_sigma", cfg.fixed_sigma);
    get_if(j, "single_tap", cfg.single_tap);
}

void parse_weights(const json& j, LossWeights& w) {
    reject_unknown(j, {"nll", "ec", "pair", "tail", "trust", "anchor", "res", "seg"},
                   "loss_weights");
    get_if(j, "nll", w.nll);
    get_if(j, "ec", w.ec);
    get_if(j, "pair", w.pair);
    get_if(j, "tail", w.tail);
    get_if(j, "trust", w.trust);
    get_if(j, "anchor", w.anchor);
    get_if(j, "res", w.res);
    get_if(j, "seg", w.seg);
}

void parse_hyper(const json& j, RankingHyper& h) {
    reject_unknown(j, {"tau_ec", "tau_pair", "delta", "t_tail", "k_pairs"}, "ranking_hyper");
    get_if(j, "tau_ec", h.tau_ec);
    get_if(j, "tau_pair", h.tau_pair);
    get_if(j, "delta", h.delta);
    get_if(j, "t_tail", h.t_tail);
    get_if(j, "k_pairs", h.k_pairs);
}

void parse_train(const json& j, TrainConfig& t) {
    reject_unknown(j, {"lr_max", "lr_min", "beta1", "beta2", "eps", "weight_decay", "clip_norm",
                       "max_epochs", "early_stop_tolerance", "seed"},
                   "train");
    get_if(j, "lr_max", t.optim.lr_max);
    get_if(j, "lr_min", t.optim.lr_min);
    get_if(j, "beta1", t.optim.beta1);
    get_if(j, "beta2", t.optim.beta2);
    get_if(j, "eps", t.optim.eps);
    get_if(j, "weight_decay", t.optim.weight_decay);
    get_if(j, "clip_norm", t.optim.clip_norm);
    get_if(j, "max_epochs", t.max_epochs);
    get_if(j, "early_stop_tolerance", t.early_stop_tolerance);
    get_if(j, "seed", t.seed);
}

}  // namespace

void RunConfig::validate() const {
    synth.validate();
    train.validate();
    if (static_cast<size_t>(synth.tap_channels.size()) < 1)
        throw ConfigError("config: at least one tap required");
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.synth.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j, {"version", "seed", "output_dir", "synth", "train", "loss_weights",
                       "ranking_hyper", "head"},
                   "<root>");
    int version = kConfigVersion;
    get_if(j, "version", version);
    if (version != kConfigVersion)
        throw ConfigError("unsupported config version " + std::to_string(version));

    RunConfig cfg;
    get_if(j, "seed", cfg.seed);
    get_if(j, "output_dir", cfg.output_dir);
    cfg.synth.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    if (j.contains("synth")) parse_synth(j.at("synth"), cfg.synth);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    if (j.contains("loss_weights")) parse_weights(j.at("loss_weights"), cfg.train.weights);
    if (j.contains("ranking_hyper")) parse_hyper(j.at("ranking_hyper"), cfg.train.hyper);
    if (j.contains("head")) parse_head(j.at("head"), cfg.train.head);
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["version"] = kConfigVersion;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["synth"] = {{"extents", cfg.synth.extents},
                  {"num_classes", cfg.synth.num_classes},
                  {"tap_channels", cfg.synth.tap_channels},
                  {"tap_strides", cfg.synth.tap_strides},
                  {"noise_level", cfg.synth.noise_level},
                  {"blur_radius", cfg.synth.blur_radius},
                  {"cases_train", cfg.synth.cases_train},
                  {"cases_val", cfg.synth.cases_val},
                  {"cases_test", cfg.synth.cases_test},
                  {"seed", cfg.synth.seed}};
    j["train"] = {{"lr_max", cfg.train.optim.lr_max},
                  {"lr_min", cfg.train.optim.lr_min},
                  {"beta1", cfg.train.optim.beta1},
                  {"beta2", cfg.train.optim.beta2},
                  {"eps", cfg.train.optim.eps},
                  {"weight_decay", cfg.train.optim.weight_decay},
                  {"clip_norm", cfg.train.optim.clip_norm},
                  {"max_epochs", cfg.train.max_epochs},
                  {"early_stop_tolerance", cfg.train.early_stop_tolerance},
                  {"seed", cfg.train.seed}};
    j["loss_weights"] = {{"nll", cfg.train.weights.nll},     {"ec", cfg.train.weights.ec},
                         {"pair", cfg.train.weights.pair},   {"tail", cfg.train.weights.tail},
                         {"trust", cfg.train.weights.trust}, {"anchor", cfg.train.weights.anchor},
                         {"res", cfg.train.weights.res},     {"seg", cfg.train.weights.seg}};
    j["ranking_hyper"] = {{"tau_ec", cfg.train.hyper.tau_ec},
                          {"tau_pair", cfg.train.hyper.tau_pair},
                          {"delta", cfg.train.hyper.delta},
                          {"t_tail", cfg.train.hyper.t_tail},
                          {"k_pairs", cfg.train.hyper.k_pairs}};
    j["head"] = {{"probes", cfg.train.head.probes},
                 {"sigma_init", cfg.train.head.sigma_init},
                 {"epsilon", cfg.train.head.epsilon},
                 {"gamma", cfg.train.head.gamma},
                 {"target_channels", cfg.train.head.target_channels},
                 {"aleatoric", cfg.train.head.aleatoric},
                 {"calibration_only", !cfg.train.head.ranking},
                 {"ranking_only", !cfg.train.head.calibration},
                 {"direct_head", cfg.train.head.direct_head},
                 {"fixed_sigma", cfg.train.head.fixed_sigma},
                 {"single_tap", cfg.train.head.single_tap}};
    return j.dump(2) + "\n";
}

}  // namespace swu
