#pragma once
// Training objective: negative log-likelihood on tempered logits,
// error-correlation, pairwise ranking, tail, trust, anchor-consistency,
// and residual regularization terms, combined as a weighted sum.

#include "swu/head.hpp"

namespace swu {

struct LossWeights {
    double nll = 0.5;
    double ec = 0.25;
    double pair = 0.25;
    double tail = 0.25;
    double trust = 0.05;
    double anchor = 0.05;
    double res = 0.05;
    double seg = 0.0;  // backbone refinement is out of scope; must stay 0

    void validate() const;
};

struct RankingHyper {
    double tau_ec = 1.0;
    double tau_pair = 1.0;
    double delta = 0.1;
    double t_tail = 1.0;
    int64_t k_pairs = 4096;

    void validate() const;
};

// e_i = 1 iff argmax_c z_c != y_i (ties toward the lowest class index).
DenseField error_indicator(const DenseField& logits, const LabelField& labels);

// (err, corr) index pairs sampled uniformly with replacement; empty when
// either population is empty. K = min(k_cap, n_err * n_corr).
std::vector<std::pair<int64_t, int64_t>> sample_error_pairs(const std::vector<double>& errors,
                                                            int64_t k_cap, uint64_t seed);

// ---- standalone loss evaluations (used by tests and baselines) ----
DenseField standardize_field(const DenseField& u);
double nll_loss(const DenseField& tempered_logits, const LabelField& labels);
double ec_loss(const DenseField& u_hat, const DenseField& errors, double tau);
double pairwise_loss(const DenseField& u, const DenseField& errors, double delta, double tau,
                     int64_t k_pairs, uint64_t seed);
double tail_loss(const DenseField& u, const DenseField& errors, double t_tail);
double trust_loss(const DenseField& delta_base, const DenseField& logits);
double anchor_consistency_loss(const DenseField& u_rnk, const DenseField& u_anchor);
double residual_reg_loss(const DenseField& weight, const DenseField& u_res);
double total_loss(const std::map<std::string, double>& terms, const LossWeights& weights);

// ---- graph form used in training ----
struct LossBreakdown {
    Var total;                            // invalid when no term is active
    std::map<std::string, double> terms;  // evaluated active terms by name
};

// `anchor_target` overrides the stop-gradient target of the anchor term;
// by default it is the standardized current anchor value. Finite-difference
// oracles pass the base-point target so both sides see the same frozen
// constant.
LossBreakdown build_total_loss(Tape& tape, const HeadForward& fw, const CaseData& cs,
                               const HeadConfig& cfg, const LossWeights& weights,
                               const RankingHyper& hyper, uint64_t pair_seed,
                               const std::vector<double>* anchor_target = nullptr);

// Standardized anchor value of a forward pass (the default stop-gradient
// target of the anchor-consistency term).
std::vector<double> anchor_target_values(const Tape& tape, const HeadForward& fw);

constexpr double kStandardizeEps = 1e-6;
constexpr double kNllFloor = 1e-12;

}  // namespace swu
