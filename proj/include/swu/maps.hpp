#pragma once
// Margin weighting, aleatoric/calibration branches, logit tempering,
// entropy, and the anchor/ranking maps.

#include "swu/graph.hpp"

namespace swu {

// ---- double-precision cores over (B,C,S) logits/probabilities ----
// These feed the graph as constants and back the public field wrappers.

// Stable per-voxel softmax across channels.
std::vector<double> softmax_values(const std::vector<double>& z, const Shape& shape);
// Largest minus second-largest probability per voxel; shape (B,1,S).
std::vector<double> margin_values(const std::vector<double>& p, const Shape& shape);
// exp(-gamma * m) per voxel.
std::vector<double> weight_values(const std::vector<double>& m, double gamma);
// Shannon entropy per voxel with 0*log(0) = 0.
std::vector<double> entropy_values(const std::vector<double>& p, const Shape& shape);

// ---- graph builders ----

// U_ale = softplus(psi_ale(h)).
Var build_aleatoric(Tape& tape, Var h, Var ale_w, Var ale_b);

// U_cal = softplus(psi_cal([log1p(U_epi + U_res), log1p(U_ale), m])).
// The aleatoric feature is omitted when `u_ale` is invalid.
Var build_calibration(Tape& tape, Var u_epi, Var u_res, Var u_ale, Var margin_const,
                      Var cal_w, Var cal_b);

// z_tilde = z / sqrt(1 + U_cal), broadcast over channels.
Var build_tempered_logits(Tape& tape, Var logits, Var u_cal);

// U_anchor = log1p(U_epi) + 1/2 log1p(U_res) + 1/4 log1p(U_cal)
//          + 1/4 H/log(C) + w.  `hw_const` carries the constant part
//          (entropy and weight terms), u_cal may be invalid (treated as 0).
Var build_anchor(Tape& tape, Var u_epi, Var u_res, Var u_cal, Var hw_const);

// U_rnk = (1 + 0.1 tanh a) * U_anchor + b + softplus(c) * w.
Var build_ranking(Tape& tape, Var u_anchor, Var weight_const, Var a, Var b, Var c);

// ---- standalone field forms ----

DenseField margin_map(const DenseField& probs);
DenseField ambiguity_weight(const DenseField& margin, double gamma);
DenseField aleatoric_map(const DenseField& h, const LinearParams& psi_ale);
DenseField calibration_map(const DenseField& u_epi, const DenseField& u_res,
                           const DenseField* u_ale, const DenseField& margin,
                           const LinearParams& psi_cal);
DenseField temper_logits(const DenseField& logits, const DenseField& u_cal);
DenseField entropy_map(const DenseField& probs);
DenseField anchor_map(const DenseField& u_epi, const DenseField& u_res,
                      const DenseField& u_cal, const DenseField& entropy,
                      const DenseField& weight, int num_classes);
DenseField ranking_map(const DenseField& u_anchor, const DenseField& weight, double a,
                       double b, double c);

}  // namespace swu
