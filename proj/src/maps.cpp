#include "swu/maps.hpp"

#include <cmath>

namespace swu {

static int64_t spatial_of(const Shape& s) {
    int64_t n = 1;
    for (size_t i = 2; i < s.size(); ++i) n *= s[i];
    return n;
}

std::vector<double> softmax_values(const std::vector<double>& z, const Shape& shape) {
    const int64_t b = shape[0], c = shape[1], sp = spatial_of(shape);
    if (c < 2) throw ShapeError("softmax: needs at least 2 channels");
    std::vector<double> p(z.size());
    for (int64_t nb = 0; nb < b; ++nb) {
        const double* base = z.data() + nb * c * sp;
        double* out = p.data() + nb * c * sp;
        for (int64_t i = 0; i < sp; ++i) {
            double mx = base[i];
            for (int64_t k = 1; k < c; ++k) mx = std::max(mx, base[k * sp + i]);
            double denom = 0.0;
            for (int64_t k = 0; k < c; ++k) {
                const double e = std::exp(base[k * sp + i] - mx);
                out[k * sp + i] = e;
                denom += e;
            }
            for (int64_t k = 0; k < c; ++k) out[k * sp + i] /= denom;
        }
    }
    return p;
}

std::vector<double> margin_values(const std::vector<double>& p, const Shape& shape) {
    const int64_t b = shape[0], c = shape[1], sp = spatial_of(shape);
    std::vector<double> m(static_cast<size_t>(b * sp));
    for (int64_t nb = 0; nb < b; ++nb) {
        const double* base = p.data() + nb * c * sp;
        double* out = m.data() + nb * sp;
        for (int64_t i = 0; i < sp; ++i) {
            double top = -1.0, second = -1.0;
            for (int64_t k = 0; k < c; ++k) {
                const double v = base[k * sp + i];
                if (v > top) {
                    second = top;
                    top = v;
                } else if (v > second) {
                    second = v;
                }
            }
            out[i] = top - second;
        }
    }
    return m;
}

std::vector<double> weight_values(const std::vector<double>& m, double gamma) {
    if (gamma <= 0.0) throw ConfigError("ambiguity weight: gamma must be > 0");
    std::vector<double> w(m.size());
    for (size_t i = 0; i < m.size(); ++i) w[i] = std::exp(-gamma * m[i]);
    return w;
}

std::vector<double> entropy_values(const std::vector<double>& p, const Shape& shape) {
    const int64_t b = shape[0], c = shape[1], sp = spatial_of(shape);
    std::vector<double> h(static_cast<size_t>(b * sp), 0.0);
    for (int64_t nb = 0; nb < b; ++nb) {
        const double* base = p.data() + nb * c * sp;
        double* out = h.data() + nb * sp;
        for (int64_t i = 0; i < sp; ++i) {
            double acc = 0.0;
            for (int64_t k = 0; k < c; ++k) {
                const double v = base[k * sp + i];
                if (v > 0.0) acc -= v * std::log(v);
            }
            out[i] = acc;
        }
    }
    return h;
}

// ---- graph builders ----

Var build_aleatoric(Tape& tape, Var h, Var ale_w, Var ale_b) {
    return tape.softplus(tape.pointwise_linear(ale_w, ale_b, h));
}

Var build_calibration(Tape& tape, Var u_epi, Var u_res, Var u_ale, Var margin_const,
                      Var cal_w, Var cal_b) {
    std::vector<Var> features;
    features.push_back(tape.log1p(tape.add(u_epi, u_res)));
    if (u_ale.valid()) features.push_back(tape.log1p(u_ale));
    features.push_back(margin_const);
    const int64_t width = tape.shape_of(cal_w)[1];
    if (width != static_cast<int64_t>(features.size()))
        throw ShapeError("calibration head: feature width " + std::to_string(features.size()) +
                         " does not match projector width " + std::to_string(width));
    return tape.softplus(tape.pointwise_linear(cal_w, cal_b, tape.channel_concat(features)));
}

Var build_tempered_logits(Tape& tape, Var logits, Var u_cal) {
    return tape.broadcast_mul(logits, tape.rsqrt1p(u_cal));
}

Var build_anchor(Tape& tape, Var u_epi, Var u_res, Var u_cal, Var hw_const) {
    Var acc = tape.log1p(u_epi);
    acc = tape.add(acc, tape.scale(tape.log1p(u_res), 0.5));
    if (u_cal.valid()) acc = tape.add(acc, tape.scale(tape.log1p(u_cal), 0.25));
    return tape.add(acc, hw_const);
}

Var build_ranking(Tape& tape, Var u_anchor, Var weight_const, Var a, Var b, Var c) {
    Var slope = tape.add_const(tape.scale(tape.tanh(a), 0.1), 1.0);
    Var out = tape.scalar_scale(u_anchor, slope);
    out = tape.scalar_add(out, b);
    return tape.add(out, tape.scalar_scale(weight_const, tape.softplus(c)));
}

// ---- standalone field forms ----

static std::vector<double> to_doubles(const DenseField& f) {
    return std::vector<double>(f.data.begin(), f.data.end());
}

static DenseField from_doubles(const std::vector<double>& v, Shape shape,
                               const std::string& ctx) {
    DenseField f(std::move(shape));
    for (size_t i = 0; i < v.size(); ++i) f.data[i] = static_cast<float>(v[i]);
    f.ensure_finite(ctx);
    return f;
}

static Shape one_channel_shape(const Shape& s) {
    Shape out = s;
    out[1] = 1;
    return out;
}

DenseField margin_map(const DenseField& probs) {
    return from_doubles(margin_values(to_doubles(probs), probs.shape),
                        one_channel_shape(probs.shape), "margin_map");
}

DenseField ambiguity_weight(const DenseField& margin, double gamma) {
    return from_doubles(weight_values(to_doubles(margin), gamma), margin.shape,
                        "ambiguity_weight");
}

DenseField aleatoric_map(const DenseField& h, const LinearParams& psi_ale) {
    Tape tape;
    Var u = build_aleatoric(tape, tape.constant(h), tape.constant(psi_ale.w.v, psi_ale.w.shape),
                            tape.constant(psi_ale.b.v, psi_ale.b.shape));
    return tape.to_field(u, "aleatoric_map");
}

DenseField calibration_map(const DenseField& u_epi, const DenseField& u_res,
                           const DenseField* u_ale, const DenseField& margin,
                           const LinearParams& psi_cal) {
    Tape tape;
    Var ale = u_ale ? tape.constant(*u_ale) : Var{};
    Var u = build_calibration(tape, tape.constant(u_epi), tape.constant(u_res), ale,
                              tape.constant(margin), tape.constant(psi_cal.w.v, psi_cal.w.shape),
                              tape.constant(psi_cal.b.v, psi_cal.b.shape));
    return tape.to_field(u, "calibration_map");
}

DenseField temper_logits(const DenseField& logits, const DenseField& u_cal) {
    Tape tape;
    Var z = build_tempered_logits(tape, tape.constant(logits), tape.constant(u_cal));
    return tape.to_field(z, "temper_logits");
}

DenseField entropy_map(const DenseField& probs) {
    return from_doubles(entropy_values(to_doubles(probs), probs.shape),
                        one_channel_shape(probs.shape), "entropy_map");
}

DenseField anchor_map(const DenseField& u_epi, const DenseField& u_res,
                      const DenseField& u_cal, const DenseField& entropy,
                      const DenseField& weight, int num_classes) {
    if (num_classes < 2) throw ShapeError("anchor_map: need at least 2 classes");
    Tape tape;
    const double inv_log_c = 1.0 / std::log(static_cast<double>(num_classes));
    std::vector<double> hw(entropy.data.size());
    for (size_t i = 0; i < hw.size(); ++i)
        hw[i] = 0.25 * static_cast<double>(entropy.data[i]) * inv_log_c +
                static_cast<double>(weight.data[i]);
    Var anchor = build_anchor(tape, tape.constant(u_epi), tape.constant(u_res),
                              tape.constant(u_cal), tape.constant(hw, entropy.shape));
    return tape.to_field(anchor, "anchor_map");
}

DenseField ranking_map(const DenseField& u_anchor, const DenseField& weight, double a,
                       double b, double c) {
    Tape tape;
    Var u = build_ranking(tape, tape.constant(u_anchor), tape.constant(weight),
                          tape.scalar_constant(a), tape.scalar_constant(b),
                          tape.scalar_constant(c));
    return tape.to_field(u, "ranking_map");
}

}  // namespace swu
