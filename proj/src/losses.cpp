#include "swu/losses.hpp"

#include "swu/rng.hpp"

#include <cmath>

namespace swu {

void LossWeights::validate() const {
    for (double w : {nll, ec, pair, tail, trust, anchor, res})
        if (w < 0.0) throw ConfigError("loss weights must be nonnegative");
    if (seg != 0.0)
        throw ConfigError("loss weight seg must be 0: backbone refinement is not supported");
}

void RankingHyper::validate() const {
    if (tau_ec <= 0.0 || tau_pair <= 0.0 || t_tail <= 0.0)
        throw ConfigError("ranking temperatures must be > 0");
    if (delta < 0.0) throw ConfigError("ranking margin delta must be >= 0");
    if (k_pairs < 1) throw ConfigError("pair budget must be >= 1");
}

DenseField error_indicator(const DenseField& logits, const LabelField& labels) {
    const int64_t b = logits.batch(), c = logits.channels(), sp = logits.spatial_numel();
    if (labels.numel() != b * sp) throw ShapeError("error_indicator: label count mismatch");
    for (int32_t y : labels.data)
        if (y < 0 || y >= c) throw ShapeError("error_indicator: label out of range");
    LabelField pred = argmax_channel(logits);
    Shape shape{b, 1};
    for (size_t d = 2; d < logits.shape.size(); ++d) shape.push_back(logits.shape[d]);
    DenseField e(shape);
    for (int64_t i = 0; i < b * sp; ++i)
        e.data[static_cast<size_t>(i)] =
            pred.data[static_cast<size_t>(i)] == labels.data[static_cast<size_t>(i)] ? 0.0f : 1.0f;
    return e;
}

std::vector<std::pair<int64_t, int64_t>> sample_error_pairs(const std::vector<double>& errors,
                                                            int64_t k_cap, uint64_t seed) {
    std::vector<int64_t> err, corr;
    for (size_t i = 0; i < errors.size(); ++i)
        (errors[i] != 0.0 ? err : corr).push_back(static_cast<int64_t>(i));
    std::vector<std::pair<int64_t, int64_t>> pairs;
    if (err.empty() || corr.empty()) return pairs;
    const int64_t total = static_cast<int64_t>(err.size()) * static_cast<int64_t>(corr.size());
    const int64_t k = std::min<int64_t>(k_cap, total);
    Rng rng(mix_seed({seed, 0x50414952ULL}));
    pairs.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) {
        const int64_t ei = err[rng.uniform_index(err.size())];
        const int64_t ci = corr[rng.uniform_index(corr.size())];
        pairs.emplace_back(ei, ci);
    }
    return pairs;
}

// ---- standalone evaluations ----

static std::vector<double> to_doubles(const DenseField& f) {
    return std::vector<double>(f.data.begin(), f.data.end());
}

DenseField standardize_field(const DenseField& u) {
    const std::vector<double> s = standardize_values(to_doubles(u), kStandardizeEps);
    DenseField out(u.shape);
    for (size_t i = 0; i < s.size(); ++i) out.data[i] = static_cast<float>(s[i]);
    return out;
}

double nll_loss(const DenseField& tempered_logits, const LabelField& labels) {
    Tape tape;
    return tape.scalar_value(
        tape.nll_from_logits(tape.constant(tempered_logits), labels, kNllFloor));
}

double ec_loss(const DenseField& u_hat, const DenseField& errors, double tau) {
    if (tau <= 0.0) throw ConfigError("ec_loss: tau must be > 0");
    Tape tape;
    Var scaled = tape.scale(tape.constant(u_hat), 1.0 / tau);
    return tape.scalar_value(tape.bce_logits_mean(scaled, to_doubles(errors)));
}

double pairwise_loss(const DenseField& u, const DenseField& errors, double delta, double tau,
                     int64_t k_pairs, uint64_t seed) {
    require_shape(errors.shape, u.shape, "pairwise_loss");
    const auto pairs = sample_error_pairs(to_doubles(errors), k_pairs, seed);
    Tape tape;
    return tape.scalar_value(tape.pairwise_softplus(tape.constant(u), pairs, delta, tau));
}

double tail_loss(const DenseField& u, const DenseField& errors, double t_tail) {
    require_shape(errors.shape, u.shape, "tail_loss");
    Tape tape;
    return tape.scalar_value(tape.tail_weighted(tape.constant(u), to_doubles(errors), t_tail));
}

double trust_loss(const DenseField& delta_base, const DenseField& logits) {
    require_shape(delta_base.shape, logits.shape, "trust_loss");
    Tape tape;
    Var delta = tape.constant(delta_base);
    Var z = tape.constant(logits);
    const double inv_vox =
        1.0 / static_cast<double>(logits.batch() * logits.spatial_numel());
    Var sq = tape.scale(tape.sum_all(tape.mul(delta, delta)), inv_vox);
    Var probs0 = tape.softmax_channels(z);
    Var probs1 = tape.softmax_channels(tape.add(z, delta));
    Var d = tape.sub(probs1, probs0);
    Var prob_term = tape.scale(tape.sum_all(tape.mul(d, d)), 0.25 * inv_vox);
    return tape.scalar_value(tape.add(sq, prob_term));
}

double anchor_consistency_loss(const DenseField& u_rnk, const DenseField& u_anchor) {
    require_shape(u_anchor.shape, u_rnk.shape, "anchor_consistency_loss");
    Tape tape;
    Var nrm = tape.standardize(tape.constant(u_rnk), kStandardizeEps);
    const std::vector<double> target = standardize_values(to_doubles(u_anchor), kStandardizeEps);
    return tape.scalar_value(tape.smooth_l1_mean(nrm, target));
}

double residual_reg_loss(const DenseField& weight, const DenseField& u_res) {
    require_shape(u_res.shape, weight.shape, "residual_reg_loss");
    double acc = 0.0;
    for (size_t i = 0; i < weight.data.size(); ++i)
        acc += (1.0 - static_cast<double>(weight.data[i])) * static_cast<double>(u_res.data[i]);
    return acc / static_cast<double>(weight.data.size());
}

double total_loss(const std::map<std::string, double>& terms, const LossWeights& weights) {
    weights.validate();
    auto pick = [&](const char* name, double w) {
        if (w == 0.0) return 0.0;  // zero-weight terms are skipped
        auto it = terms.find(name);
        return it == terms.end() ? 0.0 : w * it->second;
    };
    return pick("nll", weights.nll) + pick("ec", weights.ec) + pick("pair", weights.pair) +
           pick("tail", weights.tail) + pick("trust", weights.trust) +
           pick("anchor", weights.anchor) + pick("res", weights.res);
}

// ---- graph form ----

std::vector<double> anchor_target_values(const Tape& tape, const HeadForward& fw) {
    return standardize_values(tape.value_of(fw.u_anchor), kStandardizeEps);
}

LossBreakdown build_total_loss(Tape& tape, const HeadForward& fw, const CaseData& cs,
                               const HeadConfig& cfg, const LossWeights& weights,
                               const RankingHyper& hyper, uint64_t pair_seed,
                               const std::vector<double>* anchor_target) {
    weights.validate();
    hyper.validate();
    LossBreakdown out;

    // Error indicators from the raw backbone logits.
    std::vector<double> errors;
    {
        DenseField e = error_indicator(cs.logits, cs.labels);
        errors.assign(e.data.begin(), e.data.end());
    }

    std::vector<std::pair<Var, double>> active;
    auto add_term = [&](const char* name, Var term, double w) {
        out.terms[name] = tape.scalar_value(term);
        active.emplace_back(term, w);
    };

    if (weights.nll > 0.0 && cfg.calibration)
        add_term("nll", tape.nll_from_logits(fw.ztil, cs.labels, kNllFloor), weights.nll);

    if (cfg.ranking && fw.u_rnk.valid()) {
        Var u_hat = tape.standardize(fw.u_rnk, kStandardizeEps);
        if (weights.ec > 0.0)
            add_term("ec", tape.bce_logits_mean(tape.scale(u_hat, 1.0 / hyper.tau_ec), errors),
                     weights.ec);
        if (weights.pair > 0.0) {
            const auto pairs = sample_error_pairs(errors, hyper.k_pairs, pair_seed);
            add_term("pair", tape.pairwise_softplus(fw.u_rnk, pairs, hyper.delta, hyper.tau_pair),
                     weights.pair);
        }
        if (weights.tail > 0.0)
            add_term("tail", tape.tail_weighted(fw.u_rnk, errors, hyper.t_tail), weights.tail);
        if (weights.anchor > 0.0) {
            // The anchor branch is a stop-gradient target: standardize its
            // current value outside the graph and treat it as constant.
            const std::vector<double> target =
                anchor_target ? *anchor_target : anchor_target_values(tape, fw);
            Var nrm = tape.standardize(fw.u_rnk, kStandardizeEps);
            add_term("anchor", tape.smooth_l1_mean(nrm, target), weights.anchor);
        }
    }

    if (weights.trust > 0.0 && fw.delta_base.valid()) {
        const double inv_vox =
            1.0 / static_cast<double>(cs.logits.batch() * cs.logits.spatial_numel());
        Var z = tape.constant(cs.logits);
        Var sq = tape.scale(tape.sum_all(tape.mul(fw.delta_base, fw.delta_base)), inv_vox);
        Var probs0 = tape.constant(fw.probs, cs.logits.shape);
        Var probs1 = tape.softmax_channels(tape.add(z, fw.delta_base));
        Var d = tape.sub(probs1, probs0);
        Var prob_term = tape.scale(tape.sum_all(tape.mul(d, d)), 0.25 * inv_vox);
        add_term("trust", tape.add(sq, prob_term), weights.trust);
    }

    if (weights.res > 0.0 && fw.u_res.valid()) {
        std::vector<double> one_minus_w(fw.weight.size());
        for (size_t i = 0; i < fw.weight.size(); ++i) one_minus_w[i] = 1.0 - fw.weight[i];
        Var res = tape.mean_all(
            tape.mul(fw.u_res, tape.constant(one_minus_w, fw.map_shape)));
        add_term("res", res, weights.res);
    }

    if (active.empty()) return out;
    Var total = tape.scale(active[0].first, active[0].second);
    for (size_t i = 1; i < active.size(); ++i)
        total = tape.add(total, tape.scale(active[i].first, active[i].second));
    out.total = total;
    out.terms["total"] = tape.scalar_value(total);
    return out;
}

}  // namespace swu
