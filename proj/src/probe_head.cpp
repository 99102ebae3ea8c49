#include "swu/probe_head.hpp"

namespace swu {

std::vector<std::vector<double>> signed_unit_patterns(int num_probes) {
    if (num_probes < 1) throw ConfigError("signed_unit_patterns: need at least one probe");
    std::vector<std::vector<double>> out;
    out.reserve(2 * static_cast<size_t>(num_probes));
    for (int r = 0; r < num_probes; ++r) {
        std::vector<double> plus(static_cast<size_t>(num_probes), 0.0);
        plus[static_cast<size_t>(r)] = 1.0;
        out.push_back(plus);
        std::vector<double> minus(static_cast<size_t>(num_probes), 0.0);
        minus[static_cast<size_t>(r)] = -1.0;
        out.push_back(minus);
    }
    return out;
}

ProbeGraph build_probe_graph(Tape& tape, Var h, Var logits, Var psi_w, Var psi_b,
                             Var alpha, Var mixer_w, Var mixer_b, double epsilon,
                             const std::vector<std::vector<double>>& patterns) {
    if (patterns.size() < 2)
        throw ShapeError("probe head: need at least 2 perturbation patterns");
    const int64_t num_probes = tape.shape_of(psi_w)[0];
    for (const auto& u : patterns)
        if (static_cast<int64_t>(u.size()) != num_probes)
            throw ShapeError("probe head: pattern length does not match probe count");

    ProbeGraph g;
    g.responses = tape.pointwise_linear(psi_w, psi_b, h);
    g.scales = tape.add_const(tape.softplus(alpha), epsilon);
    g.delta_base = tape.pointwise_linear(mixer_w, mixer_b, g.responses);

    std::vector<Var> perturbed;
    perturbed.reserve(patterns.size());
    for (const auto& u : patterns) {
        // (sigma * u) elementwise, then per-channel scaling of v.
        Var su = tape.mul(g.scales, tape.constant(u, {num_probes}));
        Var scaled = tape.channel_scale(g.responses, su);
        Var delta = tape.pointwise_linear(mixer_w, mixer_b, scaled);
        perturbed.push_back(tape.softmax_channels(tape.add(logits, delta)));
    }
    g.u_epi = tape.channel_var_sum(perturbed);

    const int64_t classes = tape.shape_of(g.delta_base)[1];
    g.u_probe = tape.channel_mean_square(g.responses, 1.0 / static_cast<double>(num_probes));
    g.u_res = tape.channel_mean_square(g.delta_base, 1.0 / static_cast<double>(classes));
    return g;
}

// ---- standalone wrappers ----

DenseField probe_responses(const DenseField& h, const LinearParams& psi) {
    Tape tape;
    Var v = tape.pointwise_linear(tape.constant(psi.w.v, psi.w.shape),
                                  tape.constant(psi.b.v, psi.b.shape), tape.constant(h));
    return tape.to_field(v, "probe_responses");
}

std::vector<double> probe_scales(const std::vector<double>& alpha, double epsilon) {
    if (epsilon <= 0.0) throw ConfigError("probe_scales: epsilon must be > 0");
    std::vector<double> out(alpha.size());
    for (size_t i = 0; i < alpha.size(); ++i) out[i] = softplus_scalar(alpha[i]) + epsilon;
    return out;
}

DenseField base_delta(const DenseField& v, const LinearParams& mixer) {
    Tape tape;
    Var d = tape.pointwise_linear(tape.constant(mixer.w.v, mixer.w.shape),
                                  tape.constant(mixer.b.v, mixer.b.shape), tape.constant(v));
    return tape.to_field(d, "base_delta");
}

DenseField pattern_delta(const DenseField& v, const std::vector<double>& sigma,
                         const std::vector<double>& pattern, const LinearParams& mixer) {
    if (sigma.size() != pattern.size() || static_cast<int64_t>(sigma.size()) != v.channels())
        throw ShapeError("pattern_delta: sigma/pattern/probe dimensions disagree");
    Tape tape;
    const int64_t r = v.channels();
    std::vector<double> su(sigma.size());
    for (size_t i = 0; i < sigma.size(); ++i) su[i] = sigma[i] * pattern[i];
    Var scaled = tape.channel_scale(tape.constant(v), tape.constant(su, {r}));
    Var d = tape.pointwise_linear(tape.constant(mixer.w.v, mixer.w.shape),
                                  tape.constant(mixer.b.v, mixer.b.shape), scaled);
    return tape.to_field(d, "pattern_delta");
}

DenseField epistemic_map(const DenseField& logits, const DenseField& v,
                         const std::vector<double>& sigma, const LinearParams& mixer,
                         const std::vector<std::vector<double>>& patterns) {
    if (patterns.size() < 2) throw ShapeError("epistemic_map: need at least 2 patterns");
    Tape tape;
    const int64_t r = v.channels();
    Var vv = tape.constant(v);
    Var z = tape.constant(logits);
    Var mw = tape.constant(mixer.w.v, mixer.w.shape);
    Var mb = tape.constant(mixer.b.v, mixer.b.shape);
    std::vector<Var> perturbed;
    for (const auto& u : patterns) {
        if (static_cast<int64_t>(u.size()) != r)
            throw ShapeError("epistemic_map: pattern length mismatch");
        std::vector<double> su(u.size());
        for (size_t i = 0; i < u.size(); ++i) su[i] = sigma[i] * u[i];
        Var scaled = tape.channel_scale(vv, tape.constant(su, {r}));
        Var delta = tape.pointwise_linear(mw, mb, scaled);
        perturbed.push_back(tape.softmax_channels(tape.add(z, delta)));
    }
    return tape.to_field(tape.channel_var_sum(perturbed), "epistemic_map");
}

DenseField probe_energy(const DenseField& v) {
    Tape tape;
    Var e = tape.channel_mean_square(tape.constant(v), 1.0 / static_cast<double>(v.channels()));
    return tape.to_field(e, "probe_energy");
}

DenseField residual_energy(const DenseField& delta_base) {
    Tape tape;
    Var e = tape.channel_mean_square(tape.constant(delta_base),
                                     1.0 / static_cast<double>(delta_base.channels()));
    return tape.to_field(e, "residual_energy");
}

}  // namespace swu
