#pragma once
// Checkpoint layout: <dir>/checkpoint.json holds the run configuration,
// training summary, and the parameter manifest; weight tensors live as
// float32 binary tensors under <dir>/params/.

#include "swu/run_config.hpp"

namespace swu {

struct Checkpoint {
    ParamStore params;
    RunConfig config;
    int best_epoch = 0;
    double best_val_score = 0.0;
    double initial_val_score = 0.0;
};

void save_checkpoint(const std::string& dir, const ParamStore& params, const RunConfig& cfg,
                     const TrainHistory& history);
Checkpoint load_checkpoint(const std::string& dir);

// Per-epoch history CSV with fixed columns.
void write_history_csv(const std::string& path, const TrainHistory& history);

// Dataset directory layout: <dir>/<split>/case_<id>/{tap<k>.swut,
// logits.swut, labels.swut} plus a manifest of ids per split.
void save_cases(const std::string& dir, const std::string& split,
                const std::vector<CaseData>& cases);
std::vector<CaseData> load_cases(const std::string& dir, const std::string& split);

}  // namespace swu
