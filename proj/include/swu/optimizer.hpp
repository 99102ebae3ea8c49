#pragma once
// AdamW with decoupled weight decay, global-norm gradient clipping, and
// the cosine learning-rate schedule.

#include "swu/graph.hpp"

namespace swu {

struct OptimSettings {
    double lr_max = 1e-3;
    double lr_min = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
    double clip_norm = 12.0;

    void validate() const;
};

// lr(t) = lr_min + (lr_max - lr_min)/2 * (1 + cos(pi t / max_epochs)).
double cosine_lr(int epoch, int max_epochs, double lr_max, double lr_min);

// Scales all gradients by clip_norm/g when the global L2 norm g exceeds
// clip_norm; returns the pre-clip norm.
double clip_gradients(GradStore& grads, double clip_norm);

class AdamW {
public:
    explicit AdamW(const OptimSettings& s) : s_(s) { s_.validate(); }

    // Decoupled decay first, then the bias-corrected moment update.
    // Only parameters present in `grads` are touched.
    void step(ParamStore& params, const GradStore& grads, double lr);

    int64_t step_count() const { return t_; }

private:
    OptimSettings s_;
    int64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

}  // namespace swu
