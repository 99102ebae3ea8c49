#pragma once
// Voxel-level evaluation: Dice, Brier, AUROC, risk-coverage curves and
// AURC, reference curves, accuracy-threshold curves, entropy scoring,
// and scalar temperature fitting.

#include "swu/field.hpp"

#include <optional>
#include <string>
#include <vector>

namespace swu {

enum class CurveProvenance { Method, Oracle, Random };

struct RiskCoverageCurve {
    std::vector<double> coverage;  // k/N for k = 1..N
    std::vector<double> risk;      // prefix error rates
    CurveProvenance provenance = CurveProvenance::Method;
};

struct AccThresholdPoint {
    double threshold = 0.0;
    std::optional<double> accuracy;  // missing when nothing is retained
    double retained_fraction = 0.0;
};

struct CaseMetrics {
    std::string case_id;
    double dice = 0.0;
    double brier = 0.0;
    std::optional<double> auroc;  // missing when the error labels are degenerate
    double aurc = 0.0;
};

// Mean Dice over the non-background classes present in either mask;
// classes absent from both are excluded; 1.0 when no foreground exists.
double dice(const LabelField& pred, const LabelField& gt, int num_classes);

// Mean squared distance between probability vectors and one-hot targets.
double brier(const DenseField& probs, const LabelField& labels);

// Mann-Whitney statistic with mid-rank ties. Returns nullopt when all
// labels agree (no error/correct population to compare).
std::optional<double> auroc(const std::vector<double>& u, const std::vector<uint8_t>& e);

// Sorts by ascending uncertainty (ties by original index) and reports the
// empirical error rate of every prefix.
RiskCoverageCurve risk_coverage_curve(const std::vector<double>& u,
                                      const std::vector<uint8_t>& e);

// Trapezoidal integral over the curve grid, starting at coverage 1/N.
double aurc(const RiskCoverageCurve& curve);

// Random rejection (flat at the mean error rate) and the oracle ordering.
std::pair<RiskCoverageCurve, RiskCoverageCurve> reference_curves(const std::vector<uint8_t>& e);

// 101 thresholds uniformly on [0,1]; retained = voxels with max prob >= t.
std::vector<AccThresholdPoint> accuracy_threshold_curve(const DenseField& probs,
                                                        const LabelField& labels);

// Per-voxel Shannon entropy of a probability field, as a 1-channel field.
DenseField entropy_score(const DenseField& probs);

// Scalar temperature minimizing mean NLL of softmax(z/T) over the given
// validation cases; golden-section search on log T over [log 0.05, log 20].
double fit_temperature(const std::vector<DenseField>& logits,
                       const std::vector<LabelField>& labels);

// Column order of the per-case metrics CSV.
std::string case_metrics_csv_header();
std::string case_metrics_csv_row(const CaseMetrics& m, const std::string& method);

}  // namespace swu
