#pragma once
// Reverse-mode automatic differentiation over dense fields.
//
// Node values live on the tape in double precision; float32 DenseFields
// enter as constants and leave through to_field(). The graph is built
// eagerly per forward pass, is acyclic by construction (ops may only
// reference existing nodes), and supports exactly one backward pass.

#include "swu/field.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace swu {

// Double-precision tensor used for learnable parameters.
struct Tensor {
    Shape shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(Shape s, double fill = 0.0);
    int64_t numel() const { return static_cast<int64_t>(v.size()); }
};

using ParamStore = std::map<std::string, Tensor>;
using GradStore = std::map<std::string, Tensor>;

// Weight/bias pair of a per-voxel linear map.
struct LinearParams {
    Tensor w;  // (out, in)
    Tensor b;  // (out)
};

struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves ----
    Var constant(const DenseField& f);
    Var constant(std::vector<double> value, Shape shape);
    Var scalar_constant(double v);
    Var param(const std::string& name, const Tensor& t);

    // ---- elementwise / structural ops ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double k);
    Var add_const(Var a, double k);
    Var softplus(Var a);
    Var log1p(Var a);
    Var tanh(Var a);
    Var rsqrt1p(Var a);  // (1 + x)^(-1/2)
    Var softmax_channels(Var a);
    // W: (out,in), bias: (out) or invalid Var for none, x: (B,in,S...).
    Var pointwise_linear(Var weight, Var bias, Var x);
    Var channel_concat(const std::vector<Var>& parts);
    // x: (B,C,S...), s: (B,1,S...) broadcast across channels.
    Var broadcast_mul(Var x, Var s);
    // x: (B,R,S...), s: vector (R); scales channel r by s[r].
    Var channel_scale(Var x, Var s);
    Var scalar_scale(Var x, Var s);  // s: scalar node
    Var scalar_add(Var x, Var s);    // s: scalar node
    Var nearest_resize(Var x, const Shape& target_spatial);

    // ---- reductions / fused objectives ----
    Var sum_all(Var a);                              // -> scalar
    Var mean_all(Var a);                             // -> scalar
    Var channel_mean_square(Var a, double coeff);    // -> (B,1,S...)
    Var channel_var_sum(const std::vector<Var>& a);  // population variance -> (B,1,S...)
    Var standardize(Var a, double eps);
    Var nll_from_logits(Var logits, const LabelField& labels, double floor);
    Var bce_logits_mean(Var logits, const std::vector<double>& targets);
    // pairs are (error_index, correct_index) into the flattened field.
    Var pairwise_softplus(Var u, const std::vector<std::pair<int64_t, int64_t>>& pairs,
                          double delta, double tau);
    Var tail_weighted(Var u, const std::vector<double>& errors, double temperature);
    Var smooth_l1_mean(Var x, const std::vector<double>& target);

    // ---- access ----
    const Shape& shape_of(Var v) const;
    const std::vector<double>& value_of(Var v) const;
    double scalar_value(Var v) const;
    DenseField to_field(Var v, const std::string& context) const;

    // Runs the backward pass from a scalar loss. A second call without
    // rebuilding the graph throws.
    void backward(Var loss);
    bool backward_done() const { return backward_done_; }

    // Gradient of a registered parameter (zeros if the loss does not
    // depend on it). Only valid after backward().
    Tensor param_grad(const std::string& name) const;
    GradStore param_grads() const;

    size_t node_count() const;

private:
    struct Node;
    std::vector<Node> nodes_;
    std::map<std::string, int32_t> params_;
    bool backward_done_ = false;

    Var push(Node&& n);
    Node& node(Var v);
    const Node& node(Var v) const;
    void check_same_shape(Var a, Var b, const char* what) const;
};

// Standardization used for stop-gradient targets; matches Tape::standardize.
std::vector<double> standardize_values(const std::vector<double>& x, double eps);

double softplus_scalar(double x);
double sigmoid_scalar(double x);

}  // namespace swu
