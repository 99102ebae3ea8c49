#pragma once
// Run configuration: one JSON document covering data synthesis, head
// architecture (including ablation switches), loss weights, and training.
// Unknown keys are rejected; defaults follow the standard configuration.

#include "swu/synth.hpp"
#include "swu/trainer.hpp"

#include <string>

namespace swu {

constexpr int kConfigVersion = 1;

struct RunConfig {
    uint64_t seed = 7;
    std::string output_dir;
    SynthConfig synth;
    TrainConfig train;

    void validate() const;
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace swu
