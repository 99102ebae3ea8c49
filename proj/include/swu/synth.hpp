#pragma once
// Deterministic synthetic frozen backbone. Generates smooth class regions,
// boundary-concentrated logit noise with a spatially varying amplitude,
// and tapped feature maps that are fixed seeded linear images of the
// pre-softmax latent. Everything is reproducible from (seed, case index).

#include "swu/head.hpp"

namespace swu {

struct SynthConfig {
    Shape extents = {32, 32};  // spatial lattice (1-3 dims)
    int num_classes = 3;
    std::vector<int> tap_channels = {16, 8};
    std::vector<int> tap_strides = {1, 2};  // 1 = full resolution, 2 = half, ...
    double noise_level = 1.5;
    int blur_radius = 2;  // boundary blur width
    int cases_train = 50;
    int cases_val = 20;
    int cases_test = 30;
    uint64_t seed = 0x5EED5EEDULL;

    void validate() const;
};

using SynthCase = CaseData;

// Case-index offsets keep the split streams disjoint.
int64_t split_offset(const std::string& split_tag);

SynthCase generate_case(const SynthConfig& cfg, int64_t case_index);
std::vector<SynthCase> generate_split(const SynthConfig& cfg, int n_cases,
                                      const std::string& split_tag);

}  // namespace swu
