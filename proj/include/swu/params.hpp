#pragma once
// Learnable head parameters: initialization, naming, float32 rounding.

#include "swu/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace swu {

// Configuration of the uncertainty head. The branch switches implement the
// ablation axes; the defaults are the full model.
struct HeadConfig {
    int probes = 8;
    double sigma_init = 0.1;
    double epsilon = 1e-6;  // probe-scale floor
    double gamma = 4.0;     // margin-weight sharpness
    int target_channels = 32;
    bool aleatoric = true;
    bool calibration = true;  // calibration branch (tempered logits, U_cal)
    bool ranking = true;      // learned ranking head (a, b, c) and ranking losses
    bool direct_head = false; // replace probes with a direct uncertainty projection
    bool fixed_sigma = false; // keep probe scales frozen at sigma_init
    bool single_tap = false;  // consume only the first (finest) tap

    void validate() const;
    bool aleatoric_active() const { return aleatoric && calibration; }
};

// Inverse of softplus: returns a with softplus(a) = y (y > 0).
double softplus_inverse(double y);

// Parameter names follow a "<branch>.<tensor>" scheme, e.g. "probe.psi.w".
ParamStore init_head_params(const HeadConfig& cfg, const std::vector<int>& tap_channels,
                            int num_classes, uint64_t seed);

// Rounds every parameter to the nearest float32 value. Checkpoints store
// float32 tensors, so canonical parameters are kept float32-representable.
void round_params_f32(ParamStore& params);

// Channel widths the parameter set expects; throws on mismatch.
void check_params_match(const ParamStore& params, const HeadConfig& cfg,
                        const std::vector<int>& tap_channels, int num_classes);

}  // namespace swu
