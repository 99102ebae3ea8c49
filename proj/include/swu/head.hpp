#pragma once
// Full uncertainty-head forward pass: fusion -> probes -> aleatoric /
// calibration -> anchor -> ranking, built on one tape so the training
// objective can differentiate through every learnable branch.

#include "swu/maps.hpp"
#include "swu/params.hpp"

#include <optional>

namespace swu {

// One case as produced by the frozen backbone: tapped features plus
// logits, with ground-truth labels for training and evaluation.
struct CaseData {
    std::vector<DenseField> taps;
    DenseField logits;
    LabelField labels;
    int64_t id = 0;
};

// Differentiable vars plus the z-derived constants of one forward pass.
struct HeadForward {
    Var h;           // fused representation
    Var v;           // probe responses (invalid for direct head)
    Var delta_base;  // A(v) (invalid for direct head)
    Var u_epi;
    Var u_probe;     // invalid for direct head
    Var u_res;       // invalid for direct head
    Var u_ale;       // invalid unless aleatoric branch active
    Var u_cal;       // invalid unless calibration branch active
    Var ztil;        // tempered logits (constant z when calibration is off)
    Var u_anchor;
    Var u_rnk;       // invalid unless ranking head active
    Var weight_const;

    Shape map_shape;  // (B,1,spatial)
    std::vector<double> probs;    // softmax of raw logits
    std::vector<double> margin;   // (B,1,S)
    std::vector<double> weight;   // exp(-gamma m)
    std::vector<double> entropy;  // H(p)
};

HeadForward build_head_forward(Tape& tape, const std::vector<DenseField>& taps,
                               const DenseField& logits, const ParamStore& params,
                               const HeadConfig& cfg);

// Structured inference output.
struct UncertaintyBundle {
    DenseField v;
    DenseField u_epi;
    std::optional<DenseField> u_ale;
    DenseField u_cal;
    DenseField u_rnk;
    DenseField u_probe;
    DenseField u_res;
    DenseField margin;
    DenseField weight;
    DenseField entropy;
    DenseField tempered_logits;

    // Checks the range invariants of every map; throws on violation.
    void check_invariants(int num_classes) const;
};

UncertaintyBundle infer_bundle(const CaseData& cs, const ParamStore& params,
                               const HeadConfig& cfg);

// Scalar uncertainty map used for ranking metrics: U_rnk when the ranking
// head is active, otherwise U_cal.
const DenseField& ranking_score(const UncertaintyBundle& bundle, const HeadConfig& cfg);

}  // namespace swu
