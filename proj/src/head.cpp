#include "swu/head.hpp"

#include "swu/fusion.hpp"
#include "swu/probe_head.hpp"

#include <cmath>

namespace swu {

HeadForward build_head_forward(Tape& tape, const std::vector<DenseField>& taps,
                               const DenseField& logits, const ParamStore& params,
                               const HeadConfig& cfg) {
    cfg.validate();
    if (taps.empty()) throw ShapeError("head forward: no taps");
    std::vector<int> tap_channels;
    for (const DenseField& t : taps) tap_channels.push_back(static_cast<int>(t.channels()));
    const int num_classes = static_cast<int>(logits.channels());
    check_params_match(params, cfg, tap_channels, num_classes);

    auto P = [&](const std::string& name) -> const Tensor& {
        return params.at(name);
    };
    // Frozen tensors enter as constants so they receive no gradient.
    auto as_param = [&](const std::string& name) { return tape.param(name, P(name)); };
    auto as_const = [&](const std::string& name) {
        return tape.constant(P(name).v, P(name).shape);
    };

    HeadForward fw;

    // ---- fusion ----
    const size_t n_taps = cfg.single_tap ? 1 : taps.size();
    std::vector<Var> tap_vars;
    std::vector<std::pair<Var, Var>> proj_vars;
    for (size_t k = 0; k < n_taps; ++k) {
        tap_vars.push_back(tape.constant(taps[k]));
        const std::string base = "fuse.proj" + std::to_string(k);
        proj_vars.emplace_back(as_param(base + ".w"), as_param(base + ".b"));
    }
    fw.h = fuse_taps_graph(tape, tap_vars, proj_vars,
                           {as_param("fuse.out.w"), as_param("fuse.out.b")});

    const Shape& hs = tape.shape_of(fw.h);
    Shape target_spatial(hs.begin() + 2, hs.end());
    if (logits.spatial_extents() != target_spatial)
        throw ShapeError("head forward: logits spatial grid does not match the finest tap");

    Var z = tape.constant(logits);

    // ---- z-derived constants ----
    {
        std::vector<double> zd(logits.data.begin(), logits.data.end());
        fw.probs = softmax_values(zd, logits.shape);
        fw.margin = margin_values(fw.probs, logits.shape);
        fw.weight = weight_values(fw.margin, cfg.gamma);
        fw.entropy = entropy_values(fw.probs, logits.shape);
    }
    fw.map_shape = Shape{logits.shape[0], 1};
    for (size_t d = 2; d < logits.shape.size(); ++d) fw.map_shape.push_back(logits.shape[d]);
    Var margin_const = tape.constant(fw.margin, fw.map_shape);
    fw.weight_const = tape.constant(fw.weight, fw.map_shape);

    // ---- probe branch (or direct head) ----
    if (cfg.direct_head) {
        fw.u_epi = tape.softplus(tape.pointwise_linear(as_param("direct.w"),
                                                       as_param("direct.b"), fw.h));
    } else {
        Var alpha = cfg.fixed_sigma ? as_const("probe.alpha") : as_param("probe.alpha");
        ProbeGraph pg = build_probe_graph(tape, fw.h, z, as_param("probe.psi.w"),
                                          as_param("probe.psi.b"), alpha,
                                          as_param("probe.mixer.w"), as_param("probe.mixer.b"),
                                          cfg.epsilon, signed_unit_patterns(cfg.probes));
        fw.v = pg.responses;
        fw.delta_base = pg.delta_base;
        fw.u_epi = pg.u_epi;
        fw.u_probe = pg.u_probe;
        fw.u_res = pg.u_res;
    }
    Var u_res_for_maps = fw.u_res.valid()
                             ? fw.u_res
                             : tape.constant(std::vector<double>(
                                                 static_cast<size_t>(shape_numel(fw.map_shape)), 0.0),
                                             fw.map_shape);

    // ---- calibration branch ----
    if (cfg.calibration) {
        if (cfg.aleatoric_active())
            fw.u_ale = build_aleatoric(tape, fw.h, as_param("ale.w"), as_param("ale.b"));
        fw.u_cal = build_calibration(tape, fw.u_epi, u_res_for_maps, fw.u_ale, margin_const,
                                     as_param("cal.w"), as_param("cal.b"));
        fw.ztil = build_tempered_logits(tape, z, fw.u_cal);
    } else {
        fw.ztil = z;
    }

    // ---- anchor and ranking ----
    {
        const double inv_log_c = 1.0 / std::log(static_cast<double>(num_classes));
        std::vector<double> hw(fw.entropy.size());
        for (size_t i = 0; i < hw.size(); ++i)
            hw[i] = 0.25 * fw.entropy[i] * inv_log_c + fw.weight[i];
        Var hw_const = tape.constant(hw, fw.map_shape);
        fw.u_anchor = build_anchor(tape, fw.u_epi, u_res_for_maps, fw.u_cal, hw_const);
    }
    if (cfg.ranking)
        fw.u_rnk = build_ranking(tape, fw.u_anchor, fw.weight_const, as_param("rank.a"),
                                 as_param("rank.b"), as_param("rank.c"));
    return fw;
}

void UncertaintyBundle::check_invariants(int num_classes) const {
    auto nonneg = [](const DenseField& f, const char* name) {
        for (float v : f.data)
            if (!(v >= 0.0f)) throw NumericError(std::string(name) + " must be nonnegative");
    };
    nonneg(u_epi, "U_epi");
    nonneg(u_cal, "U_cal");
    nonneg(u_probe, "U_probe");
    nonneg(u_res, "U_res");
    if (u_ale) nonneg(*u_ale, "U_ale");
    for (float v : margin.data)
        if (!(v >= 0.0f && v <= 1.0f)) throw NumericError("margin must lie in [0,1]");
    for (float v : weight.data)
        if (!(v > 0.0f && v <= 1.0f)) throw NumericError("weight must lie in (0,1]");
    const float hmax = static_cast<float>(std::log(static_cast<double>(num_classes))) + 1e-5f;
    for (float v : entropy.data)
        if (!(v >= 0.0f && v <= hmax)) throw NumericError("entropy must lie in [0, log C]");
    u_rnk.ensure_finite("U_rnk");
    tempered_logits.ensure_finite("tempered logits");
}

UncertaintyBundle infer_bundle(const CaseData& cs, const ParamStore& params,
                               const HeadConfig& cfg) {
    Tape tape;
    HeadForward fw = build_head_forward(tape, cs.taps, cs.logits, params, cfg);

    auto const_field = [&](const std::vector<double>& v) {
        DenseField f(fw.map_shape);
        for (size_t i = 0; i < v.size(); ++i) f.data[i] = static_cast<float>(v[i]);
        return f;
    };
    auto zero_map = [&]() { return DenseField(fw.map_shape, 0.0f); };

    UncertaintyBundle b;
    b.v = fw.v.valid() ? tape.to_field(fw.v, "bundle v") : zero_map();
    b.u_epi = tape.to_field(fw.u_epi, "bundle U_epi");
    if (fw.u_ale.valid()) b.u_ale = tape.to_field(fw.u_ale, "bundle U_ale");
    b.u_cal = fw.u_cal.valid() ? tape.to_field(fw.u_cal, "bundle U_cal") : zero_map();
    b.u_probe = fw.u_probe.valid() ? tape.to_field(fw.u_probe, "bundle U_probe") : zero_map();
    b.u_res = fw.u_res.valid() ? tape.to_field(fw.u_res, "bundle U_res") : zero_map();
    b.margin = const_field(fw.margin);
    b.weight = const_field(fw.weight);
    b.entropy = const_field(fw.entropy);
    b.tempered_logits = tape.to_field(fw.ztil, "bundle tempered logits");
    if (fw.u_rnk.valid()) {
        b.u_rnk = tape.to_field(fw.u_rnk, "bundle U_rnk");
    } else {
        // Calibration-only head: the calibration map is the only score.
        b.u_rnk = b.u_cal;
    }
    b.check_invariants(static_cast<int>(cs.logits.channels()));
    return b;
}

const DenseField& ranking_score(const UncertaintyBundle& bundle, const HeadConfig& cfg) {
    return cfg.ranking ? bundle.u_rnk : bundle.u_cal;
}

}  // namespace swu
