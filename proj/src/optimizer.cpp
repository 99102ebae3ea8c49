#include "swu/optimizer.hpp"

#include <cmath>

namespace swu {

void OptimSettings::validate() const {
    if (lr_max <= 0.0 || lr_min < 0.0 || lr_min > lr_max)
        throw ConfigError("optimizer: need 0 <= lr_min <= lr_max, lr_max > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("optimizer: betas must lie in [0,1)");
    if (eps <= 0.0) throw ConfigError("optimizer: eps must be > 0");
    if (weight_decay < 0.0) throw ConfigError("optimizer: weight decay must be >= 0");
    if (clip_norm <= 0.0) throw ConfigError("optimizer: clip norm must be > 0");
}

double cosine_lr(int epoch, int max_epochs, double lr_max, double lr_min) {
    if (max_epochs < 1) throw ConfigError("cosine_lr: max_epochs must be >= 1");
    const double t = static_cast<double>(epoch) / static_cast<double>(max_epochs);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.14159265358979323846 * t));
}

double clip_gradients(GradStore& grads, double clip_norm) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (double v : g.v) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
        const double scale = clip_norm / norm;
        for (auto& [name, g] : grads)
            for (double& v : g.v) v *= scale;
    }
    return norm;
}

void AdamW::step(ParamStore& params, const GradStore& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
        auto pit = params.find(name);
        if (pit == params.end()) throw ConfigError("AdamW: gradient for unknown parameter " + name);
        Tensor& p = pit->second;
        if (!same_shape(p.shape, g.shape))
            throw ShapeError("AdamW: gradient shape mismatch for " + name);
        Tensor& m = m_.try_emplace(name, Tensor(p.shape, 0.0)).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(p.shape, 0.0)).first->second;
        for (size_t i = 0; i < p.v.size(); ++i) {
            p.v[i] -= lr * s_.weight_decay * p.v[i];
            m.v[i] = s_.beta1 * m.v[i] + (1.0 - s_.beta1) * g.v[i];
            v.v[i] = s_.beta2 * v.v[i] + (1.0 - s_.beta2) * g.v[i] * g.v[i];
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] -= lr * mhat / (std::sqrt(vhat) + s_.eps);
        }
    }
}

}  // namespace swu
