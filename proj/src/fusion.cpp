#include "swu/fusion.hpp"

namespace swu {

Shape finest_grid(const std::vector<DenseField>& taps) {
    if (taps.empty()) throw ShapeError("fusion: at least one tap required");
    Shape target = taps[0].spatial_extents();
    for (const DenseField& t : taps) {
        const Shape sp = t.spatial_extents();
        if (sp.size() != target.size())
            throw ShapeError("fusion: taps differ in spatial rank");
        for (size_t d = 0; d < sp.size(); ++d) target[d] = std::max(target[d], sp[d]);
    }
    return target;
}

Var fuse_taps_graph(Tape& tape, const std::vector<Var>& taps,
                    const std::vector<std::pair<Var, Var>>& proj,
                    std::pair<Var, Var> fuser) {
    if (taps.empty()) throw ShapeError("fusion: at least one tap required");
    if (proj.size() != taps.size())
        throw ShapeError("fusion: projection count does not match tap count");

    const int64_t batch = tape.shape_of(taps[0])[0];
    Shape target;
    {
        std::vector<DenseField> shapes_only;
        for (Var t : taps) {
            const Shape& s = tape.shape_of(t);
            if (s[0] != batch) throw ShapeError("fusion: taps differ in batch size");
            shapes_only.emplace_back(s, 0.0f);
        }
        target = finest_grid(shapes_only);
    }

    std::vector<Var> projected;
    projected.reserve(taps.size());
    for (size_t k = 0; k < taps.size(); ++k) {
        Var p = tape.pointwise_linear(proj[k].first, proj[k].second, taps[k]);
        if (tape.shape_of(p).size() >= 3) {
            Shape sp(tape.shape_of(p).begin() + 2, tape.shape_of(p).end());
            if (sp != target) p = tape.nearest_resize(p, target);
        }
        projected.push_back(p);
    }
    Var cat = projected.size() == 1 ? projected[0] : tape.channel_concat(projected);
    return tape.pointwise_linear(fuser.first, fuser.second, cat);
}

DenseField fuse_taps(const TapSet& taps, const std::vector<LinearParams>& proj,
                     const LinearParams& fuser) {
    if (taps.taps.empty()) throw ShapeError("fuse_taps: at least one tap required");
    if (proj.size() != taps.taps.size())
        throw ShapeError("fuse_taps: projection count does not match tap count");
    const int64_t expect_in = static_cast<int64_t>(taps.taps.size()) * taps.target_channels;
    if (fuser.w.shape.size() != 2 || fuser.w.shape[1] != expect_in)
        throw ShapeError("fuse_taps: fuser expects " + std::to_string(expect_in) + " input channels");

    Tape tape;
    std::vector<Var> tap_vars;
    std::vector<std::pair<Var, Var>> proj_vars;
    for (size_t k = 0; k < taps.taps.size(); ++k) {
        tap_vars.push_back(tape.constant(taps.taps[k]));
        proj_vars.emplace_back(tape.constant(proj[k].w.v, proj[k].w.shape),
                               tape.constant(proj[k].b.v, proj[k].b.shape));
    }
    Var h = fuse_taps_graph(tape, tap_vars, proj_vars,
                            {tape.constant(fuser.w.v, fuser.w.shape),
                             tape.constant(fuser.b.v, fuser.b.shape)});
    return tape.to_field(h, "fuse_taps");
}

}  // namespace swu
