#pragma once
// Rank-1 posterior probes: probe responses v = psi(h), learned nonnegative
// scales, signed perturbation patterns, class-logit deltas, and the
// perturbation-energy maps (epistemic / probe / residual).

#include "swu/graph.hpp"

namespace swu {

// Fixed signed probe patterns. The default design is the 2R signed
// one-hot vectors {+e_r, -e_r}, which is symmetric under negation.
std::vector<std::vector<double>> signed_unit_patterns(int num_probes);

struct ProbeGraph {
    Var responses;   // v: (B,R,S)
    Var scales;      // sigma: (R)
    Var delta_base;  // A(v): (B,C,S)
    Var u_epi;       // (B,1,S)
    Var u_probe;     // (B,1,S)
    Var u_res;       // (B,1,S)
};

// Builds the probe branch on the tape. `alpha` may be a constant node when
// the scales are frozen. `logits` is the (constant) backbone logit node.
ProbeGraph build_probe_graph(Tape& tape, Var h, Var logits, Var psi_w, Var psi_b,
                             Var alpha, Var mixer_w, Var mixer_b, double epsilon,
                             const std::vector<std::vector<double>>& patterns);

// ---- standalone forms (convenience wrappers over a private tape) ----

DenseField probe_responses(const DenseField& h, const LinearParams& psi);
std::vector<double> probe_scales(const std::vector<double>& alpha, double epsilon);
DenseField base_delta(const DenseField& v, const LinearParams& mixer);
DenseField pattern_delta(const DenseField& v, const std::vector<double>& sigma,
                         const std::vector<double>& pattern, const LinearParams& mixer);
DenseField epistemic_map(const DenseField& logits, const DenseField& v,
                         const std::vector<double>& sigma, const LinearParams& mixer,
                         const std::vector<std::vector<double>>& patterns);
DenseField probe_energy(const DenseField& v);
DenseField residual_energy(const DenseField& delta_base);

}  // namespace swu
