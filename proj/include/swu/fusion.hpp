#pragma once
// Multi-scale tap fusion: project each tapped feature map to a common
// channel width, resize to the finest spatial grid (nearest neighbor),
// concatenate, and fuse with one more per-voxel linear map.

#include "swu/graph.hpp"

namespace swu {

struct TapSet {
    std::vector<DenseField> taps;
    int target_channels = 32;
};

// Finest grid: per-axis maximum over all taps.
Shape finest_grid(const std::vector<DenseField>& taps);

// Graph-building form used by the head forward pass. proj[k] = (w, b) vars.
Var fuse_taps_graph(Tape& tape, const std::vector<Var>& taps,
                    const std::vector<std::pair<Var, Var>>& proj,
                    std::pair<Var, Var> fuser);

// Standalone form for direct use; validates tap/projection consistency.
DenseField fuse_taps(const TapSet& taps, const std::vector<LinearParams>& proj,
                     const LinearParams& fuser);

}  // namespace swu
