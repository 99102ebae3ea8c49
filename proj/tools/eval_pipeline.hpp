#pragma once
// Shared evaluation pipeline used by the eval/curves/compare/ablate
// subcommands: scoring rules, per-case metric computation, CSV emission.

#include "swu/checkpoint.hpp"
#include "swu/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace swu::cli {

// Scoring rules accepted by `eval`, `curves`, and `ablate`.
//   segwithu-ranking           : ranking map of a trained head, tempered probs
//   segwithu-calibration       : calibration map as the score, tempered probs
//   entropy                    : entropy of the raw backbone probabilities
//   temperature-scaled-entropy : entropy after scalar temperature fitting
struct ScoredCase {
    int64_t id = 0;
    std::vector<double> score;
    std::vector<uint8_t> errors;
    DenseField probs;       // probabilities used for Brier
    LabelField pred;        // argmax labels
    LabelField labels;
};

struct ScoringContext {
    std::string rule;
    const Checkpoint* checkpoint = nullptr;        // required for segwithu-* rules
    std::optional<double> fitted_temperature;      // required for temperature scaling
};

bool rule_needs_checkpoint(const std::string& rule);
bool rule_needs_temperature(const std::string& rule);

ScoredCase score_case(const CaseData& cs, const ScoringContext& ctx);
CaseMetrics case_metrics(const ScoredCase& sc, int num_classes);

// Fits the scalar temperature on a validation split.
double fit_validation_temperature(const std::vector<CaseData>& val_cases);

struct EvalSummary {
    std::string method;
    std::vector<CaseMetrics> per_case;
    std::optional<double> temperature;
};

EvalSummary evaluate_split(const std::vector<CaseData>& cases, const ScoringContext& ctx,
                           int num_classes);

void write_per_case_csv(const std::string& path, const EvalSummary& summary);
void write_summary_json(const std::string& path, const EvalSummary& summary);

// Reads a per_case.csv produced by write_per_case_csv.
struct PerCaseTable {
    std::string method;
    std::vector<std::string> case_ids;
    std::vector<double> dice, brier, aurc;
    std::vector<std::optional<double>> auroc;
};
PerCaseTable read_per_case_csv(const std::string& path);

}  // namespace swu::cli
