#include "swu/params.hpp"

#include "swu/rng.hpp"

#include <cmath>

namespace swu {

void HeadConfig::validate() const {
    if (probes < 1) throw ConfigError("head: probes must be >= 1");
    if (sigma_init <= 0.0) throw ConfigError("head: sigma_init must be > 0");
    if (epsilon <= 0.0) throw ConfigError("head: epsilon must be > 0");
    if (gamma <= 0.0) throw ConfigError("head: gamma must be > 0");
    if (target_channels < 1) throw ConfigError("head: target_channels must be >= 1");
    if (!calibration && !ranking)
        throw ConfigError("head: calibration and ranking cannot both be disabled");
}

double softplus_inverse(double y) {
    if (y <= 0.0) throw ConfigError("softplus_inverse: y must be > 0");
    // log(expm1(y)), stable for small and large y.
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

static Tensor normal_tensor(Shape shape, double scale, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.v) v = scale * rng.normal();
    return t;
}

ParamStore init_head_params(const HeadConfig& cfg, const std::vector<int>& tap_channels,
                            int num_classes, uint64_t seed) {
    cfg.validate();
    if (tap_channels.empty()) throw ConfigError("init_head_params: no taps");
    if (num_classes < 2) throw ConfigError("init_head_params: need at least 2 classes");

    Rng rng(mix_seed({seed, 0x48454144ULL}));
    ParamStore p;
    const int tc = cfg.target_channels;
    const size_t n_taps = cfg.single_tap ? 1 : tap_channels.size();

    for (size_t k = 0; k < n_taps; ++k) {
        const int fk = tap_channels[k];
        const std::string base = "fuse.proj" + std::to_string(k);
        p[base + ".w"] = normal_tensor({tc, fk}, 1.0 / std::sqrt(static_cast<double>(fk)), rng);
        p[base + ".b"] = Tensor({tc}, 0.0);
    }
    const int fuse_in = static_cast<int>(n_taps) * tc;
    p["fuse.out.w"] = normal_tensor({tc, fuse_in}, 1.0 / std::sqrt(static_cast<double>(fuse_in)), rng);
    p["fuse.out.b"] = Tensor({tc}, 0.0);

    if (cfg.direct_head) {
        p["direct.w"] = normal_tensor({1, tc}, 0.5 / std::sqrt(static_cast<double>(tc)), rng);
        p["direct.b"] = Tensor({1}, 0.0);
    } else {
        p["probe.psi.w"] = normal_tensor({cfg.probes, tc}, 0.5 / std::sqrt(static_cast<double>(tc)), rng);
        p["probe.psi.b"] = Tensor({cfg.probes}, 0.0);
        p["probe.alpha"] =
            Tensor({cfg.probes}, softplus_inverse(std::max(cfg.sigma_init - cfg.epsilon, 1e-9)));
        p["probe.mixer.w"] =
            normal_tensor({num_classes, cfg.probes}, 0.5 / std::sqrt(static_cast<double>(cfg.probes)), rng);
        p["probe.mixer.b"] = Tensor({num_classes}, 0.0);
    }

    if (cfg.calibration) {
        if (cfg.aleatoric_active()) {
            p["ale.w"] = normal_tensor({1, tc}, 0.1 / std::sqrt(static_cast<double>(tc)), rng);
            p["ale.b"] = Tensor({1}, 0.0);
        }
        const int cal_in = cfg.aleatoric_active() ? 3 : 2;
        p["cal.w"] = normal_tensor({1, cal_in}, 0.1, rng);
        p["cal.b"] = Tensor({1}, 0.0);
    }

    if (cfg.ranking) {
        p["rank.a"] = Tensor({1}, 0.0);
        p["rank.b"] = Tensor({1}, 0.0);
        p["rank.c"] = Tensor({1}, 0.0);
    }
    round_params_f32(p);
    return p;
}

void round_params_f32(ParamStore& params) {
    for (auto& [name, t] : params)
        for (double& v : t.v) v = static_cast<double>(static_cast<float>(v));
}

static void require_param(const ParamStore& p, const std::string& name, const Shape& shape) {
    auto it = p.find(name);
    if (it == p.end()) throw ConfigError("missing parameter: " + name);
    if (!same_shape(it->second.shape, shape))
        throw ConfigError("parameter " + name + " has shape " + shape_str(it->second.shape) +
                          ", expected " + shape_str(shape));
}

void check_params_match(const ParamStore& params, const HeadConfig& cfg,
                        const std::vector<int>& tap_channels, int num_classes) {
    const int tc = cfg.target_channels;
    const size_t n_taps = cfg.single_tap ? 1 : tap_channels.size();
    for (size_t k = 0; k < n_taps; ++k) {
        const std::string base = "fuse.proj" + std::to_string(k);
        require_param(params, base + ".w", {tc, tap_channels[k]});
        require_param(params, base + ".b", {tc});
    }
    require_param(params, "fuse.out.w", {tc, static_cast<int64_t>(n_taps) * tc});
    require_param(params, "fuse.out.b", {tc});
    if (cfg.direct_head) {
        require_param(params, "direct.w", {1, tc});
        require_param(params, "direct.b", {1});
    } else {
        require_param(params, "probe.psi.w", {cfg.probes, tc});
        require_param(params, "probe.psi.b", {cfg.probes});
        require_param(params, "probe.alpha", {cfg.probes});
        require_param(params, "probe.mixer.w", {num_classes, cfg.probes});
        require_param(params, "probe.mixer.b", {num_classes});
    }
    if (cfg.calibration) {
        if (cfg.aleatoric_active()) {
            require_param(params, "ale.w", {1, tc});
            require_param(params, "ale.b", {1});
        }
        require_param(params, "cal.w", {1, cfg.aleatoric_active() ? 3 : 2});
        require_param(params, "cal.b", {1});
    }
    if (cfg.ranking) {
        require_param(params, "rank.a", {1});
        require_param(params, "rank.b", {1});
        require_param(params, "rank.c", {1});
    }
}

}  // namespace swu
