#pragma once
// Head training loop: per-case AdamW steps under the cosine schedule with
// gradient clipping and early stopping on the validation AURC of the
// ranking score. The backbone inputs never receive gradients.

#include "swu/losses.hpp"
#include "swu/optimizer.hpp"

namespace swu {

struct TrainConfig {
    OptimSettings optim;
    int max_epochs = 200;
    int early_stop_tolerance = 10;
    uint64_t seed = 7;
    LossWeights weights;
    RankingHyper hyper;
    HeadConfig head;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double total_loss = 0.0;
    std::map<std::string, double> terms;  // per-term means over cases
    double lr = 0.0;
    double val_score = 0.0;  // validation AURC of the ranking score
};

struct TrainHistory {
    double initial_val_score = 0.0;        // before any update
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 0 = initial parameters
    double best_val_score = 0.0;
};

struct TrainResult {
    ParamStore params;          // best-scoring parameters, float32-rounded
    ParamStore initial_params;  // parameters before any update
    TrainHistory history;
};

// Mean per-case AURC of the head's ranking score over a split.
double mean_ranking_aurc(const std::vector<CaseData>& cases, const ParamStore& params,
                         const HeadConfig& cfg);

TrainResult train_head(const std::vector<CaseData>& train_cases,
                       const std::vector<CaseData>& val_cases, const TrainConfig& cfg);

}  // namespace swu
