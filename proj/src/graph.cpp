#include "swu/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace swu {

double softplus_scalar(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<double> standardize_values(const std::vector<double>& x, double eps) {
    const size_t n = x.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    const double denom = sd + eps;
    for (size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) / denom;
    return out;
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(shape_numel(shape)), fill);
}

enum class Op : uint8_t {
    Constant,
    Param,
    Add,
    Sub,
    Mul,
    Scale,
    AddConst,
    Softplus,
    Log1p,
    Tanh,
    Rsqrt1p,
    SoftmaxChannels,
    PointwiseLinear,
    ChannelConcat,
    BroadcastMul,
    ChannelScale,
    ScalarScale,
    ScalarAdd,
    NearestResize,
    SumAll,
    ChannelMeanSquare,
    ChannelVarSum,
    Standardize,
    NllFromLogits,
    BceLogitsMean,
    PairwiseSoftplus,
    TailWeighted,
    SmoothL1Mean,
};

struct Tape::Node {
    Op op;
    Shape shape;
    std::vector<int32_t> inputs;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> aux;    // cached forward intermediates
    std::vector<double> aux2;   // constant side inputs (targets, errors)
    std::vector<int64_t> iaux;  // integer payloads (labels, pairs, index maps)
    double k0 = 0.0, k1 = 0.0;
    bool needs_grad = false;
};

// ---------------------------------------------------------------------------
// construction helpers
// ---------------------------------------------------------------------------

Tape::Tape() = default;
Tape::~Tape() = default;

size_t Tape::node_count() const { return nodes_.size(); }

Var Tape::push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(Var v) {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
        throw ShapeError("invalid graph node reference");
    return nodes_[static_cast<size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
        throw ShapeError("invalid graph node reference");
    return nodes_[static_cast<size_t>(v.id)];
}

void Tape::check_same_shape(Var a, Var b, const char* what) const {
    if (!same_shape(node(a).shape, node(b).shape))
        throw ShapeError(std::string(what) + ": shape " + shape_str(node(a).shape) +
                         " vs " + shape_str(node(b).shape));
}

static void check_field_rank(const Shape& s, const char* what) {
    if (s.size() < 3)
        throw ShapeError(std::string(what) + ": expected a (B,C,spatial...) field, got " + shape_str(s));
}

static int64_t spatial_count(const Shape& s) {
    int64_t n = 1;
    for (size_t i = 2; i < s.size(); ++i) n *= s[i];
    return n;
}

Var Tape::constant(const DenseField& f) {
    f.ensure_finite("graph constant");
    Node n;
    n.op = Op::Constant;
    n.shape = f.shape;
    n.value.assign(f.data.begin(), f.data.end());
    return push(std::move(n));
}

Var Tape::constant(std::vector<double> value, Shape shape) {
    if (static_cast<int64_t>(value.size()) != shape_numel(shape))
        throw ShapeError("constant: value length does not match shape " + shape_str(shape));
    Node n;
    n.op = Op::Constant;
    n.shape = std::move(shape);
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::scalar_constant(double v) {
    return constant(std::vector<double>{v}, Shape{1});
}

Var Tape::param(const std::string& name, const Tensor& t) {
    if (params_.count(name))
        throw ConfigError("parameter registered twice: " + name);
    Node n;
    n.op = Op::Param;
    n.shape = t.shape;
    n.value = t.v;
    n.needs_grad = true;
    Var v = push(std::move(n));
    params_[name] = v.id;
    return v;
}

// ---------------------------------------------------------------------------
// elementwise and structural ops
// ---------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Node n;
    n.op = Op::Add;
    n.shape = node(a).shape;
    n.inputs = {a.id, b.id};
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    const auto& av = node(a).value;
    const auto& bv = node(b).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] + bv[i];
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Node n;
    n.op = Op::Sub;
    n.shape = node(a).shape;
    n.inputs = {a.id, b.id};
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    const auto& av = node(a).value;
    const auto& bv = node(b).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] - bv[i];
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Node n;
    n.op = Op::Mul;
    n.shape = node(a).shape;
    n.inputs = {a.id, b.id};
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    const auto& av = node(a).value;
    const auto& bv = node(b).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] * bv[i];
    return push(std::move(n));
}

Var Tape::scale(Var a, double k) {
    Node n;
    n.op = Op::Scale;
    n.shape = node(a).shape;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    n.k0 = k;
    const auto& av = node(a).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) n.value[i] = k * av[i];
    return push(std::move(n));
}

Var Tape::add_const(Var a, double k) {
    Node n;
    n.op = Op::AddConst;
    n.shape = node(a).shape;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    n.k0 = k;
    const auto& av = node(a).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] + k;
    return push(std::move(n));
}

Var Tape::softplus(Var a) {
    Node n;
    n.op = Op::Softplus;
    n.shape = node(a).shape;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    const auto& av = node(a).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) n.value[i] = softplus_scalar(av[i]);
    return push(std::move(n));
}

Var Tape::log1p(Var a) {
    Node n;
    n.op = Op::Log1p;
    n.shape = node(a).shape;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    const auto& av = node(a).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) {
        if (av[i] <= -1.0) throw NumericError("log1p: input <= -1");
        n.value[i] = std::log1p(av[i]);
    }
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    Node n;
    n.op = Op::Tanh;
    n.shape = node(a).shape;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    const auto& av = node(a).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) n.value[i] = std::tanh(av[i]);
    return push(std::move(n));
}

Var Tape::rsqrt1p(Var a) {
    Node n;
    n.op = Op::Rsqrt1p;
    n.shape = node(a).shape;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    const auto& av = node(a).value;
    n.value.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) {
        if (av[i] <= -1.0) throw NumericError("rsqrt1p: input <= -1");
        n.value[i] = 1.0 / std::sqrt(1.0 + av[i]);
    }
    return push(std::move(n));
}

Var Tape::softmax_channels(Var a) {
    const Shape& s = node(a).shape;
    check_field_rank(s, "softmax");
    const int64_t b = s[0], c = s[1], sp = spatial_count(s);
    if (c < 2) throw ShapeError("softmax: needs at least 2 channels");
    Node n;
    n.op = Op::SoftmaxChannels;
    n.shape = s;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    const auto& av = node(a).value;
    n.value.resize(av.size());
    for (int64_t nb = 0; nb < b; ++nb) {
        const double* base = av.data() + nb * c * sp;
        double* out = n.value.data() + nb * c * sp;
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
    return push(std::move(n));
}

Var Tape::pointwise_linear(Var weight, Var bias, Var x) {
    const Shape& ws = node(weight).shape;
    const Shape& xs = node(x).shape;
    if (ws.size() != 2) throw ShapeError("pointwise_linear: weight must be a matrix");
    check_field_rank(xs, "pointwise_linear");
    const int64_t out_c = ws[0], in_c = ws[1];
    if (xs[1] != in_c)
        throw ShapeError("pointwise_linear: input has " + std::to_string(xs[1]) +
                         " channels, weight expects " + std::to_string(in_c));
    if (bias.valid()) {
        const Shape& bs = node(bias).shape;
        if (bs.size() != 1 || bs[0] != out_c)
            throw ShapeError("pointwise_linear: bias must have one entry per output channel");
    }
    const int64_t b = xs[0], sp = spatial_count(xs);
    Shape os = xs;
    os[1] = out_c;
    Node n;
    n.op = Op::PointwiseLinear;
    n.shape = os;
    n.inputs = {weight.id, bias.valid() ? bias.id : -1, x.id};
    n.needs_grad = node(weight).needs_grad || node(x).needs_grad ||
                   (bias.valid() && node(bias).needs_grad);
    n.value.assign(static_cast<size_t>(b * out_c * sp), 0.0);

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> W(node(weight).value.data(), out_c, in_c);
    for (int64_t nb = 0; nb < b; ++nb) {
        Eigen::Map<const Mat> X(node(x).value.data() + nb * in_c * sp, in_c, sp);
        Eigen::Map<Mat> O(n.value.data() + nb * out_c * sp, out_c, sp);
        O.noalias() = W * X;
    }
    if (bias.valid()) {
        const auto& bv = node(bias).value;
        for (int64_t nb = 0; nb < b; ++nb)
            for (int64_t c = 0; c < out_c; ++c) {
                double* row = n.value.data() + (nb * out_c + c) * sp;
                const double add = bv[static_cast<size_t>(c)];
                for (int64_t i = 0; i < sp; ++i) row[i] += add;
            }
    }
    return push(std::move(n));
}

Var Tape::channel_concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("channel_concat: no inputs");
    const Shape& s0 = node(parts[0]).shape;
    check_field_rank(s0, "channel_concat");
    int64_t total_c = 0;
    bool grad = false;
    for (Var p : parts) {
        const Shape& s = node(p).shape;
        if (s.size() != s0.size() || s[0] != s0[0])
            throw ShapeError("channel_concat: batch mismatch");
        for (size_t d = 2; d < s.size(); ++d)
            if (s[d] != s0[d]) throw ShapeError("channel_concat: spatial mismatch");
        total_c += s[1];
        grad = grad || node(p).needs_grad;
    }
    Shape os = s0;
    os[1] = total_c;
    const int64_t b = s0[0], sp = spatial_count(s0);
    Node n;
    n.op = Op::ChannelConcat;
    n.shape = os;
    n.needs_grad = grad;
    n.value.assign(static_cast<size_t>(b * total_c * sp), 0.0);
    for (Var p : parts) n.inputs.push_back(p.id);
    int64_t c_off = 0;
    for (Var p : parts) {
        const Shape& s = node(p).shape;
        const int64_t pc = s[1];
        const auto& pv = node(p).value;
        for (int64_t nb = 0; nb < b; ++nb)
            std::copy(pv.begin() + nb * pc * sp, pv.begin() + (nb + 1) * pc * sp,
                      n.value.begin() + (nb * total_c + c_off) * sp);
        c_off += pc;
    }
    return push(std::move(n));
}

Var Tape::broadcast_mul(Var x, Var s) {
    const Shape& xs = node(x).shape;
    const Shape& ss = node(s).shape;
    check_field_rank(xs, "broadcast_mul");
    check_field_rank(ss, "broadcast_mul");
    if (ss[1] != 1 || ss[0] != xs[0] || spatial_count(ss) != spatial_count(xs))
        throw ShapeError("broadcast_mul: scale must be (B,1,spatial) matching x");
    const int64_t b = xs[0], c = xs[1], sp = spatial_count(xs);
    Node n;
    n.op = Op::BroadcastMul;
    n.shape = xs;
    n.inputs = {x.id, s.id};
    n.needs_grad = node(x).needs_grad || node(s).needs_grad;
    n.value.resize(node(x).value.size());
    const auto& xv = node(x).value;
    const auto& sv = node(s).value;
    for (int64_t nb = 0; nb < b; ++nb)
        for (int64_t k = 0; k < c; ++k) {
            const double* xr = xv.data() + (nb * c + k) * sp;
            const double* sr = sv.data() + nb * sp;
            double* o = n.value.data() + (nb * c + k) * sp;
            for (int64_t i = 0; i < sp; ++i) o[i] = xr[i] * sr[i];
        }
    return push(std::move(n));
}

Var Tape::channel_scale(Var x, Var s) {
    const Shape& xs = node(x).shape;
    const Shape& ss = node(s).shape;
    check_field_rank(xs, "channel_scale");
    if (ss.size() != 1 || ss[0] != xs[1])
        throw ShapeError("channel_scale: scale vector must have one entry per channel");
    const int64_t b = xs[0], c = xs[1], sp = spatial_count(xs);
    Node n;
    n.op = Op::ChannelScale;
    n.shape = xs;
    n.inputs = {x.id, s.id};
    n.needs_grad = node(x).needs_grad || node(s).needs_grad;
    n.value.resize(node(x).value.size());
    const auto& xv = node(x).value;
    const auto& sv = node(s).value;
    for (int64_t nb = 0; nb < b; ++nb)
        for (int64_t k = 0; k < c; ++k) {
            const double f = sv[static_cast<size_t>(k)];
            const double* xr = xv.data() + (nb * c + k) * sp;
            double* o = n.value.data() + (nb * c + k) * sp;
            for (int64_t i = 0; i < sp; ++i) o[i] = f * xr[i];
        }
    return push(std::move(n));
}

Var Tape::scalar_scale(Var x, Var s) {
    if (shape_numel(node(s).shape) != 1) throw ShapeError("scalar_scale: s must be scalar");
    Node n;
    n.op = Op::ScalarScale;
    n.shape = node(x).shape;
    n.inputs = {x.id, s.id};
    n.needs_grad = node(x).needs_grad || node(s).needs_grad;
    const double f = node(s).value[0];
    const auto& xv = node(x).value;
    n.value.resize(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) n.value[i] = f * xv[i];
    return push(std::move(n));
}

Var Tape::scalar_add(Var x, Var s) {
    if (shape_numel(node(s).shape) != 1) throw ShapeError("scalar_add: s must be scalar");
    Node n;
    n.op = Op::ScalarAdd;
    n.shape = node(x).shape;
    n.inputs = {x.id, s.id};
    n.needs_grad = node(x).needs_grad || node(s).needs_grad;
    const double f = node(s).value[0];
    const auto& xv = node(x).value;
    n.value.resize(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) n.value[i] = xv[i] + f;
    return push(std::move(n));
}

Var Tape::nearest_resize(Var x, const Shape& target_spatial) {
    const Shape& xs = node(x).shape;
    check_field_rank(xs, "nearest_resize");
    if (target_spatial.size() != xs.size() - 2)
        throw ShapeError("nearest_resize: spatial rank mismatch");
    for (int64_t e : target_spatial)
        if (e <= 0) throw ShapeError("nearest_resize: target extents must be positive");
    Shape os = {xs[0], xs[1]};
    for (int64_t e : target_spatial) os.push_back(e);

    // Flat index map target voxel -> source voxel.
    const int64_t out_sp = spatial_count(os);
    const int64_t in_sp = spatial_count(xs);
    std::vector<int64_t> map(static_cast<size_t>(out_sp));
    const size_t nd = target_spatial.size();
    std::vector<int64_t> idx(nd, 0);
    for (int64_t o = 0; o < out_sp; ++o) {
        int64_t src = 0;
        for (size_t d = 0; d < nd; ++d) {
            const int64_t s_in = xs[2 + d];
            const int64_t s_out = target_spatial[d];
            const int64_t j = idx[d] * s_in / s_out;
            src = src * s_in + j;
        }
        map[static_cast<size_t>(o)] = src;
        for (size_t d = nd; d-- > 0;) {
            if (++idx[d] < target_spatial[d]) break;
            idx[d] = 0;
        }
    }

    Node n;
    n.op = Op::NearestResize;
    n.shape = os;
    n.inputs = {x.id};
    n.needs_grad = node(x).needs_grad;
    n.iaux = std::move(map);
    const int64_t b = xs[0], c = xs[1];
    n.value.resize(static_cast<size_t>(b * c * out_sp));
    const auto& xv = node(x).value;
    for (int64_t nb = 0; nb < b; ++nb)
        for (int64_t k = 0; k < c; ++k) {
            const double* src = xv.data() + (nb * c + k) * in_sp;
            double* dst = n.value.data() + (nb * c + k) * out_sp;
            for (int64_t i = 0; i < out_sp; ++i) dst[i] = src[n.iaux[static_cast<size_t>(i)]];
        }
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// reductions and fused objectives
// ---------------------------------------------------------------------------

Var Tape::sum_all(Var a) {
    Node n;
    n.op = Op::SumAll;
    n.shape = {1};
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    double acc = 0.0;
    for (double v : node(a).value) acc += v;
    n.value = {acc};
    return push(std::move(n));
}

Var Tape::mean_all(Var a) {
    const double inv = 1.0 / static_cast<double>(node(a).value.size());
    return scale(sum_all(a), inv);
}

Var Tape::channel_mean_square(Var a, double coeff) {
    const Shape& s = node(a).shape;
    check_field_rank(s, "channel_mean_square");
    const int64_t b = s[0], c = s[1], sp = spatial_count(s);
    Node n;
    n.op = Op::ChannelMeanSquare;
    Shape os = s;
    os[1] = 1;
    n.shape = os;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    n.k0 = coeff;
    n.value.assign(static_cast<size_t>(b * sp), 0.0);
    const auto& av = node(a).value;
    for (int64_t nb = 0; nb < b; ++nb)
        for (int64_t k = 0; k < c; ++k) {
            const double* row = av.data() + (nb * c + k) * sp;
            double* o = n.value.data() + nb * sp;
            for (int64_t i = 0; i < sp; ++i) o[i] += coeff * row[i] * row[i];
        }
    return push(std::move(n));
}

Var Tape::channel_var_sum(const std::vector<Var>& list) {
    if (list.size() < 2) throw ShapeError("channel_var_sum: needs at least 2 inputs");
    const Shape& s = node(list[0]).shape;
    check_field_rank(s, "channel_var_sum");
    bool grad = false;
    for (Var v : list) {
        check_same_shape(list[0], v, "channel_var_sum");
        grad = grad || node(v).needs_grad;
    }
    const int64_t b = s[0], c = s[1], sp = spatial_count(s);
    const double invk = 1.0 / static_cast<double>(list.size());
    Node n;
    n.op = Op::ChannelVarSum;
    Shape os = s;
    os[1] = 1;
    n.shape = os;
    n.needs_grad = grad;
    for (Var v : list) n.inputs.push_back(v.id);
    // aux holds the per-element mean over the K inputs (needed in backward).
    n.aux.assign(node(list[0]).value.size(), 0.0);
    for (Var v : list) {
        const auto& pv = node(v).value;
        for (size_t i = 0; i < pv.size(); ++i) n.aux[i] += invk * pv[i];
    }
    n.value.assign(static_cast<size_t>(b * sp), 0.0);
    for (Var v : list) {
        const auto& pv = node(v).value;
        for (int64_t nb = 0; nb < b; ++nb)
            for (int64_t k = 0; k < c; ++k) {
                const double* row = pv.data() + (nb * c + k) * sp;
                const double* mrow = n.aux.data() + (nb * c + k) * sp;
                double* o = n.value.data() + nb * sp;
                for (int64_t i = 0; i < sp; ++i) {
                    const double d = row[i] - mrow[i];
                    o[i] += invk * d * d;
                }
            }
    }
    return push(std::move(n));
}

Var Tape::standardize(Var a, double eps) {
    const auto& av = node(a).value;
    const size_t nelem = av.size();
    Node n;
    n.op = Op::Standardize;
    n.shape = node(a).shape;
    n.inputs = {a.id};
    n.needs_grad = node(a).needs_grad;
    double mean = 0.0;
    for (double v : av) mean += v;
    mean /= static_cast<double>(nelem);
    double var = 0.0;
    for (double v : av) var += (v - mean) * (v - mean);
    var /= static_cast<double>(nelem);
    const double sd = std::sqrt(var);
    n.k0 = eps;
    n.k1 = sd;
    n.value.resize(nelem);
    const double denom = sd + eps;
    for (size_t i = 0; i < nelem; ++i) n.value[i] = (av[i] - mean) / denom;
    return push(std::move(n));
}

Var Tape::nll_from_logits(Var logits, const LabelField& labels, double floor) {
    const Shape& s = node(logits).shape;
    check_field_rank(s, "nll_from_logits");
    const int64_t b = s[0], c = s[1], sp = spatial_count(s);
    if (labels.numel() != b * sp)
        throw ShapeError("nll_from_logits: label count mismatch");
    for (int32_t y : labels.data)
        if (y < 0 || y >= c) throw ShapeError("nll_from_logits: label out of range");
    Node n;
    n.op = Op::NllFromLogits;
    n.shape = {1};
    n.inputs = {logits.id};
    n.needs_grad = node(logits).needs_grad;
    n.k0 = floor;
    n.iaux.assign(labels.data.begin(), labels.data.end());
    // aux caches the softmax probabilities for the backward pass.
    n.aux.resize(node(logits).value.size());
    const auto& zv = node(logits).value;
    double acc = 0.0;
    for (int64_t nb = 0; nb < b; ++nb) {
        const double* base = zv.data() + nb * c * sp;
        double* p = n.aux.data() + nb * c * sp;
        for (int64_t i = 0; i < sp; ++i) {
            double mx = base[i];
            for (int64_t k = 1; k < c; ++k) mx = std::max(mx, base[k * sp + i]);
            double denom = 0.0;
            for (int64_t k = 0; k < c; ++k) {
                const double e = std::exp(base[k * sp + i] - mx);
                p[k * sp + i] = e;
                denom += e;
            }
            for (int64_t k = 0; k < c; ++k) p[k * sp + i] /= denom;
            const int64_t y = n.iaux[static_cast<size_t>(nb * sp + i)];
            acc -= std::log(std::max(p[y * sp + i], floor));
        }
    }
    n.value = {acc / static_cast<double>(b * sp)};
    return push(std::move(n));
}

Var Tape::bce_logits_mean(Var logits, const std::vector<double>& targets) {
    const auto& xv = node(logits).value;
    if (targets.size() != xv.size())
        throw ShapeError("bce_logits_mean: target count mismatch");
    Node n;
    n.op = Op::BceLogitsMean;
    n.shape = {1};
    n.inputs = {logits.id};
    n.needs_grad = node(logits).needs_grad;
    n.aux2 = targets;
    double acc = 0.0;
    for (size_t i = 0; i < xv.size(); ++i)
        acc += softplus_scalar(xv[i]) - targets[i] * xv[i];
    n.value = {acc / static_cast<double>(xv.size())};
    return push(std::move(n));
}

Var Tape::pairwise_softplus(Var u, const std::vector<std::pair<int64_t, int64_t>>& pairs,
                            double delta, double tau) {
    const auto& uv = node(u).value;
    Node n;
    n.op = Op::PairwiseSoftplus;
    n.shape = {1};
    n.inputs = {u.id};
    n.needs_grad = node(u).needs_grad;
    n.k0 = delta;
    n.k1 = tau;
    n.iaux.reserve(pairs.size() * 2);
    for (const auto& [ei, ci] : pairs) {
        if (ei < 0 || ci < 0 || ei >= static_cast<int64_t>(uv.size()) ||
            ci >= static_cast<int64_t>(uv.size()))
            throw ShapeError("pairwise_softplus: pair index out of range");
        n.iaux.push_back(ei);
        n.iaux.push_back(ci);
    }
    double acc = 0.0;
    if (!pairs.empty()) {
        for (const auto& [ei, ci] : pairs)
            acc += softplus_scalar((uv[static_cast<size_t>(ci)] - uv[static_cast<size_t>(ei)] + delta) / tau);
        acc /= static_cast<double>(pairs.size());
    }
    n.value = {acc};
    return push(std::move(n));
}

Var Tape::tail_weighted(Var u, const std::vector<double>& errors, double temperature) {
    const auto& uv = node(u).value;
    if (errors.size() != uv.size())
        throw ShapeError("tail_weighted: error count mismatch");
    Node n;
    n.op = Op::TailWeighted;
    n.shape = {1};
    n.inputs = {u.id};
    n.needs_grad = node(u).needs_grad;
    n.k0 = temperature;
    n.aux2 = errors;
    // aux caches the softmax weights over -u/T.
    n.aux.resize(uv.size());
    double mx = -uv[0] / temperature;
    for (size_t i = 1; i < uv.size(); ++i) mx = std::max(mx, -uv[i] / temperature);
    double denom = 0.0;
    for (size_t i = 0; i < uv.size(); ++i) {
        n.aux[i] = std::exp(-uv[i] / temperature - mx);
        denom += n.aux[i];
    }
    double acc = 0.0;
    for (size_t i = 0; i < uv.size(); ++i) {
        n.aux[i] /= denom;
        acc += n.aux[i] * errors[i];
    }
    n.value = {acc};
    return push(std::move(n));
}

Var Tape::smooth_l1_mean(Var x, const std::vector<double>& target) {
    const auto& xv = node(x).value;
    if (target.size() != xv.size())
        throw ShapeError("smooth_l1_mean: target count mismatch");
    Node n;
    n.op = Op::SmoothL1Mean;
    n.shape = {1};
    n.inputs = {x.id};
    n.needs_grad = node(x).needs_grad;
    n.aux2 = target;
    double acc = 0.0;
    for (size_t i = 0; i < xv.size(); ++i) {
        const double d = xv[i] - target[i];
        acc += std::abs(d) <= 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
    }
    n.value = {acc / static_cast<double>(xv.size())};
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// access
// ---------------------------------------------------------------------------

const Shape& Tape::shape_of(Var v) const { return node(v).shape; }

const std::vector<double>& Tape::value_of(Var v) const { return node(v).value; }

double Tape::scalar_value(Var v) const {
    if (shape_numel(node(v).shape) != 1) throw ShapeError("scalar_value: node is not scalar");
    return node(v).value[0];
}

DenseField Tape::to_field(Var v, const std::string& context) const {
    const Node& n = node(v);
    DenseField f(n.shape);
    for (size_t i = 0; i < n.value.size(); ++i) f.data[i] = static_cast<float>(n.value[i]);
    f.ensure_finite(context);
    return f;
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Tape::backward(Var loss) {
    if (backward_done_) throw Error("backward already run on this graph");
    Node& ln = node(loss);
    if (shape_numel(ln.shape) != 1) throw ShapeError("backward: loss must be scalar");
    if (!std::isfinite(ln.value[0])) throw NumericError("backward: loss is not finite");
    backward_done_ = true;
    if (!ln.needs_grad) return;

    auto grad_buf = [this](int32_t id) -> std::vector<double>& {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
        return n.grad;
    };
    grad_buf(loss.id)[0] = 1.0;

    for (int32_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.needs_grad || n.grad.empty()) continue;
        const std::vector<double>& g = n.grad;
        switch (n.op) {
            case Op::Constant:
            case Op::Param:
                break;
            case Op::Add: {
                for (int side = 0; side < 2; ++side) {
                    const int32_t in = n.inputs[static_cast<size_t>(side)];
                    if (!nodes_[static_cast<size_t>(in)].needs_grad) continue;
                    auto& ig = grad_buf(in);
                    for (size_t i = 0; i < g.size(); ++i) ig[i] += g[i];
                }
                break;
            }
            case Op::Sub: {
                if (nodes_[static_cast<size_t>(n.inputs[0])].needs_grad) {
                    auto& ig = grad_buf(n.inputs[0]);
                    for (size_t i = 0; i < g.size(); ++i) ig[i] += g[i];
                }
                if (nodes_[static_cast<size_t>(n.inputs[1])].needs_grad) {
                    auto& ig = grad_buf(n.inputs[1]);
                    for (size_t i = 0; i < g.size(); ++i) ig[i] -= g[i];
                }
                break;
            }
            case Op::Mul: {
                const auto& av = nodes_[static_cast<size_t>(n.inputs[0])].value;
                const auto& bv = nodes_[static_cast<size_t>(n.inputs[1])].value;
                if (nodes_[static_cast<size_t>(n.inputs[0])].needs_grad) {
                    auto& ig = grad_buf(n.inputs[0]);
                    for (size_t i = 0; i < g.size(); ++i) ig[i] += bv[i] * g[i];
                }
                if (nodes_[static_cast<size_t>(n.inputs[1])].needs_grad) {
                    auto& ig = grad_buf(n.inputs[1]);
                    for (size_t i = 0; i < g.size(); ++i) ig[i] += av[i] * g[i];
                }
                break;
            }
            case Op::Scale: {
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < g.size(); ++i) ig[i] += n.k0 * g[i];
                break;
            }
            case Op::AddConst: {
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < g.size(); ++i) ig[i] += g[i];
                break;
            }
            case Op::Softplus: {
                const auto& xv = nodes_[static_cast<size_t>(n.inputs[0])].value;
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < g.size(); ++i) ig[i] += sigmoid_scalar(xv[i]) * g[i];
                break;
            }
            case Op::Log1p: {
                const auto& xv = nodes_[static_cast<size_t>(n.inputs[0])].value;
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < g.size(); ++i) ig[i] += g[i] / (1.0 + xv[i]);
                break;
            }
            case Op::Tanh: {
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < g.size(); ++i)
                    ig[i] += (1.0 - n.value[i] * n.value[i]) * g[i];
                break;
            }
            case Op::Rsqrt1p: {
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < g.size(); ++i)
                    ig[i] += -0.5 * n.value[i] * n.value[i] * n.value[i] * g[i];
                break;
            }
            case Op::SoftmaxChannels: {
                const Shape& s = n.shape;
                const int64_t b = s[0], c = s[1], sp = spatial_count(s);
                auto& ig = grad_buf(n.inputs[0]);
                for (int64_t nb = 0; nb < b; ++nb) {
                    const double* p = n.value.data() + nb * c * sp;
                    const double* go = g.data() + nb * c * sp;
                    double* gi = ig.data() + nb * c * sp;
                    for (int64_t i = 0; i < sp; ++i) {
                        double dot = 0.0;
                        for (int64_t k = 0; k < c; ++k) dot += go[k * sp + i] * p[k * sp + i];
                        for (int64_t k = 0; k < c; ++k)
                            gi[k * sp + i] += p[k * sp + i] * (go[k * sp + i] - dot);
                    }
                }
                break;
            }
            case Op::PointwiseLinear: {
                const int32_t wid = n.inputs[0], bid = n.inputs[1], xid = n.inputs[2];
                const Node& wn = nodes_[static_cast<size_t>(wid)];
                const Node& xn = nodes_[static_cast<size_t>(xid)];
                const int64_t out_c = wn.shape[0], in_c = wn.shape[1];
                const int64_t b = xn.shape[0], sp = spatial_count(xn.shape);
                using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
                Eigen::Map<const Mat> W(wn.value.data(), out_c, in_c);
                if (xn.needs_grad) {
                    auto& xg = grad_buf(xid);
                    for (int64_t nb = 0; nb < b; ++nb) {
                        Eigen::Map<const Mat> G(g.data() + nb * out_c * sp, out_c, sp);
                        Eigen::Map<Mat> XG(xg.data() + nb * in_c * sp, in_c, sp);
                        XG.noalias() += W.transpose() * G;
                    }
                }
                if (wn.needs_grad) {
                    auto& wg = grad_buf(wid);
                    Eigen::Map<Mat> WG(wg.data(), out_c, in_c);
                    for (int64_t nb = 0; nb < b; ++nb) {
                        Eigen::Map<const Mat> G(g.data() + nb * out_c * sp, out_c, sp);
                        Eigen::Map<const Mat> X(xn.value.data() + nb * in_c * sp, in_c, sp);
                        WG.noalias() += G * X.transpose();
                    }
                }
                if (bid >= 0 && nodes_[static_cast<size_t>(bid)].needs_grad) {
                    auto& bg = grad_buf(bid);
                    for (int64_t nb = 0; nb < b; ++nb)
                        for (int64_t c = 0; c < out_c; ++c) {
                            const double* row = g.data() + (nb * out_c + c) * sp;
                            double acc = 0.0;
                            for (int64_t i = 0; i < sp; ++i) acc += row[i];
                            bg[static_cast<size_t>(c)] += acc;
                        }
                }
                break;
            }
            case Op::ChannelConcat: {
                const Shape& s = n.shape;
                const int64_t b = s[0], total_c = s[1], sp = spatial_count(s);
                int64_t c_off = 0;
                for (int32_t in : n.inputs) {
                    const Node& pn = nodes_[static_cast<size_t>(in)];
                    const int64_t pc = pn.shape[1];
                    if (pn.needs_grad) {
                        auto& ig = grad_buf(in);
                        for (int64_t nb = 0; nb < b; ++nb) {
                            const double* src = g.data() + (nb * total_c + c_off) * sp;
                            double* dst = ig.data() + nb * pc * sp;
                            for (int64_t i = 0; i < pc * sp; ++i) dst[i] += src[i];
                        }
                    }
                    c_off += pc;
                }
                break;
            }
            case Op::BroadcastMul: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const Node& sn = nodes_[static_cast<size_t>(n.inputs[1])];
                const int64_t b = xn.shape[0], c = xn.shape[1], sp = spatial_count(xn.shape);
                if (xn.needs_grad) {
                    auto& xg = grad_buf(n.inputs[0]);
                    for (int64_t nb = 0; nb < b; ++nb)
                        for (int64_t k = 0; k < c; ++k) {
                            const double* sr = sn.value.data() + nb * sp;
                            const double* go = g.data() + (nb * c + k) * sp;
                            double* gi = xg.data() + (nb * c + k) * sp;
                            for (int64_t i = 0; i < sp; ++i) gi[i] += sr[i] * go[i];
                        }
                }
                if (sn.needs_grad) {
                    auto& sg = grad_buf(n.inputs[1]);
                    for (int64_t nb = 0; nb < b; ++nb)
                        for (int64_t k = 0; k < c; ++k) {
                            const double* xr = xn.value.data() + (nb * c + k) * sp;
                            const double* go = g.data() + (nb * c + k) * sp;
                            double* gi = sg.data() + nb * sp;
                            for (int64_t i = 0; i < sp; ++i) gi[i] += xr[i] * go[i];
                        }
                }
                break;
            }
            case Op::ChannelScale: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const Node& sn = nodes_[static_cast<size_t>(n.inputs[1])];
                const int64_t b = xn.shape[0], c = xn.shape[1], sp = spatial_count(xn.shape);
                if (xn.needs_grad) {
                    auto& xg = grad_buf(n.inputs[0]);
                    for (int64_t nb = 0; nb < b; ++nb)
                        for (int64_t k = 0; k < c; ++k) {
                            const double f = sn.value[static_cast<size_t>(k)];
                            const double* go = g.data() + (nb * c + k) * sp;
                            double* gi = xg.data() + (nb * c + k) * sp;
                            for (int64_t i = 0; i < sp; ++i) gi[i] += f * go[i];
                        }
                }
                if (sn.needs_grad) {
                    auto& sg = grad_buf(n.inputs[1]);
                    for (int64_t nb = 0; nb < b; ++nb)
                        for (int64_t k = 0; k < c; ++k) {
                            const double* xr = xn.value.data() + (nb * c + k) * sp;
                            const double* go = g.data() + (nb * c + k) * sp;
                            double acc = 0.0;
                            for (int64_t i = 0; i < sp; ++i) acc += xr[i] * go[i];
                            sg[static_cast<size_t>(k)] += acc;
                        }
                }
                break;
            }
            case Op::ScalarScale: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const Node& sn = nodes_[static_cast<size_t>(n.inputs[1])];
                const double f = sn.value[0];
                if (xn.needs_grad) {
                    auto& xg = grad_buf(n.inputs[0]);
                    for (size_t i = 0; i < g.size(); ++i) xg[i] += f * g[i];
                }
                if (sn.needs_grad) {
                    auto& sg = grad_buf(n.inputs[1]);
                    double acc = 0.0;
                    for (size_t i = 0; i < g.size(); ++i) acc += xn.value[i] * g[i];
                    sg[0] += acc;
                }
                break;
            }
            case Op::ScalarAdd: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const Node& sn = nodes_[static_cast<size_t>(n.inputs[1])];
                if (xn.needs_grad) {
                    auto& xg = grad_buf(n.inputs[0]);
                    for (size_t i = 0; i < g.size(); ++i) xg[i] += g[i];
                }
                if (sn.needs_grad) {
                    auto& sg = grad_buf(n.inputs[1]);
                    double acc = 0.0;
                    for (size_t i = 0; i < g.size(); ++i) acc += g[i];
                    sg[0] += acc;
                }
                break;
            }
            case Op::NearestResize: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const int64_t b = xn.shape[0], c = xn.shape[1];
                const int64_t in_sp = spatial_count(xn.shape), out_sp = spatial_count(n.shape);
                auto& ig = grad_buf(n.inputs[0]);
                for (int64_t nb = 0; nb < b; ++nb)
                    for (int64_t k = 0; k < c; ++k) {
                        const double* go = g.data() + (nb * c + k) * out_sp;
                        double* gi = ig.data() + (nb * c + k) * in_sp;
                        for (int64_t i = 0; i < out_sp; ++i)
                            gi[n.iaux[static_cast<size_t>(i)]] += go[i];
                    }
                break;
            }
            case Op::SumAll: {
                auto& ig = grad_buf(n.inputs[0]);
                const double g0 = g[0];
                for (size_t i = 0; i < ig.size(); ++i) ig[i] += g0;
                break;
            }
            case Op::ChannelMeanSquare: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const int64_t b = xn.shape[0], c = xn.shape[1], sp = spatial_count(xn.shape);
                auto& ig = grad_buf(n.inputs[0]);
                for (int64_t nb = 0; nb < b; ++nb)
                    for (int64_t k = 0; k < c; ++k) {
                        const double* xr = xn.value.data() + (nb * c + k) * sp;
                        const double* go = g.data() + nb * sp;
                        double* gi = ig.data() + (nb * c + k) * sp;
                        for (int64_t i = 0; i < sp; ++i) gi[i] += 2.0 * n.k0 * xr[i] * go[i];
                    }
                break;
            }
            case Op::ChannelVarSum: {
                const double invk = 1.0 / static_cast<double>(n.inputs.size());
                const Node& first = nodes_[static_cast<size_t>(n.inputs[0])];
                const int64_t b = first.shape[0], c = first.shape[1], sp = spatial_count(first.shape);
                for (int32_t in : n.inputs) {
                    const Node& pn = nodes_[static_cast<size_t>(in)];
                    if (!pn.needs_grad) continue;
                    auto& ig = grad_buf(in);
                    for (int64_t nb = 0; nb < b; ++nb)
                        for (int64_t k = 0; k < c; ++k) {
                            const double* pv = pn.value.data() + (nb * c + k) * sp;
                            const double* mv = n.aux.data() + (nb * c + k) * sp;
                            const double* go = g.data() + nb * sp;
                            double* gi = ig.data() + (nb * c + k) * sp;
                            for (int64_t i = 0; i < sp; ++i)
                                gi[i] += go[i] * 2.0 * invk * (pv[i] - mv[i]);
                        }
                }
                break;
            }
            case Op::Standardize: {
                const double sd = n.k1, eps = n.k0;
                auto& ig = grad_buf(n.inputs[0]);
                const size_t nelem = g.size();
                if (sd < 1e-300) break;  // constant input: zero gradient
                const double denom = sd + eps;
                double gmean = 0.0, gdot = 0.0;
                for (size_t i = 0; i < nelem; ++i) {
                    gmean += g[i];
                    gdot += g[i] * n.value[i];
                }
                gmean /= static_cast<double>(nelem);
                const double corr = gdot / (static_cast<double>(nelem) * sd);
                for (size_t i = 0; i < nelem; ++i)
                    ig[i] += (g[i] - gmean) / denom - corr * n.value[i];
                break;
            }
            case Op::NllFromLogits: {
                const Node& zn = nodes_[static_cast<size_t>(n.inputs[0])];
                const int64_t b = zn.shape[0], c = zn.shape[1], sp = spatial_count(zn.shape);
                const double g0 = g[0] / static_cast<double>(b * sp);
                auto& ig = grad_buf(n.inputs[0]);
                for (int64_t nb = 0; nb < b; ++nb) {
                    const double* p = n.aux.data() + nb * c * sp;
                    double* gi = ig.data() + nb * c * sp;
                    for (int64_t i = 0; i < sp; ++i) {
                        const int64_t y = n.iaux[static_cast<size_t>(nb * sp + i)];
                        if (p[y * sp + i] <= n.k0) continue;  // clamped: constant
                        for (int64_t k = 0; k < c; ++k)
                            gi[k * sp + i] += g0 * (p[k * sp + i] - (k == y ? 1.0 : 0.0));
                    }
                }
                break;
            }
            case Op::BceLogitsMean: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const double g0 = g[0] / static_cast<double>(xn.value.size());
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < xn.value.size(); ++i)
                    ig[i] += g0 * (sigmoid_scalar(xn.value[i]) - n.aux2[i]);
                break;
            }
            case Op::PairwiseSoftplus: {
                const Node& un = nodes_[static_cast<size_t>(n.inputs[0])];
                const size_t npairs = n.iaux.size() / 2;
                if (npairs == 0) break;
                const double g0 = g[0] / (static_cast<double>(npairs) * n.k1);
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t k = 0; k < npairs; ++k) {
                    const int64_t ei = n.iaux[2 * k], ci = n.iaux[2 * k + 1];
                    const double arg = (un.value[static_cast<size_t>(ci)] -
                                        un.value[static_cast<size_t>(ei)] + n.k0) / n.k1;
                    const double s = sigmoid_scalar(arg) * g0;
                    ig[static_cast<size_t>(ci)] += s;
                    ig[static_cast<size_t>(ei)] -= s;
                }
                break;
            }
            case Op::TailWeighted: {
                const double g0 = g[0];
                const double L = n.value[0];
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < n.aux.size(); ++i)
                    ig[i] += -g0 * n.aux[i] * (n.aux2[i] - L) / n.k0;
                break;
            }
            case Op::SmoothL1Mean: {
                const Node& xn = nodes_[static_cast<size_t>(n.inputs[0])];
                const double g0 = g[0] / static_cast<double>(xn.value.size());
                auto& ig = grad_buf(n.inputs[0]);
                for (size_t i = 0; i < xn.value.size(); ++i) {
                    const double d = xn.value[i] - n.aux2[i];
                    ig[i] += g0 * (std::abs(d) <= 1.0 ? d : (d > 0.0 ? 1.0 : -1.0));
                }
                break;
            }
        }
    }
}

Tensor Tape::param_grad(const std::string& name) const {
    if (!backward_done_) throw Error("param_grad: backward has not run");
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    const Node& n = nodes_[static_cast<size_t>(it->second)];
    Tensor t(n.shape, 0.0);
    if (!n.grad.empty()) t.v = n.grad;
    return t;
}

GradStore Tape::param_grads() const {
    GradStore out;
    for (const auto& [name, id] : params_) out[name] = param_grad(name);
    return out;
}

}  // namespace swu
