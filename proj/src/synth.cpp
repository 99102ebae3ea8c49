#include "swu/synth.hpp"

#include "swu/rng.hpp"

#include <cmath>

namespace swu {

// Frozen generator constants, tuned so that with noise_level = 1 the voxel
// error rate lands in the low percent range and errors concentrate near
// label boundaries. Do not fold these into SynthConfig.
namespace {
constexpr double kLogitGain = 7.0;
constexpr double kSelfMix = 0.5;  // weight of the unblurred one-hot in the clean logits
constexpr double kOverconfidence = 2.0;
constexpr double kHetMin = 0.5;
constexpr double kHetMax = 1.3;
constexpr double kBoundaryAmp = 3.0;  // noise amplification where the clean margin shrinks
constexpr double kTapNoise = 0.15;
constexpr int kHarmonics = 4;
constexpr int kMaxFreq = 2;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

void SynthConfig::validate() const {
    if (extents.empty() || extents.size() > 3)
        throw ConfigError("synth: spatial lattice must have 1-3 dims");
    for (int64_t e : extents)
        if (e < 4) throw ConfigError("synth: extents must be >= 4");
    if (num_classes < 2) throw ConfigError("synth: need at least 2 classes");
    if (tap_channels.empty() || tap_channels.size() != tap_strides.size())
        throw ConfigError("synth: tap_channels and tap_strides must align and be nonempty");
    for (int c : tap_channels)
        if (c < 1) throw ConfigError("synth: tap channels must be >= 1");
    for (size_t k = 0; k < tap_strides.size(); ++k) {
        if (tap_strides[k] < 1) throw ConfigError("synth: tap strides must be >= 1");
        for (int64_t e : extents)
            if (e % tap_strides[k] != 0)
                throw ConfigError("synth: extents must be divisible by every tap stride");
    }
    if (noise_level < 0.0) throw ConfigError("synth: noise level must be >= 0");
    if (blur_radius < 1) throw ConfigError("synth: blur radius must be >= 1");
    if (cases_train < 0 || cases_val < 0 || cases_test < 0)
        throw ConfigError("synth: case counts must be >= 0");
}

int64_t split_offset(const std::string& split_tag) {
    if (split_tag == "train") return 0;
    if (split_tag == "val") return 1 << 20;
    if (split_tag == "test") return 2 << 20;
    throw ConfigError("unknown split tag: " + split_tag);
}

// One smooth field as a sum of low-frequency harmonics.
static std::vector<double> smooth_field(const Shape& extents, Rng& rng) {
    const size_t nd = extents.size();
    int64_t n = 1;
    for (int64_t e : extents) n *= e;
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (int h = 0; h < kHarmonics; ++h) {
        std::vector<int> freq(nd);
        int norm1 = 0;
        for (size_t d = 0; d < nd; ++d) {
            freq[d] = static_cast<int>(rng.uniform_index(kMaxFreq + 1));
            norm1 += std::abs(freq[d]);
        }
        if (norm1 == 0) freq[0] = 1, norm1 = 1;
        const double amp = rng.normal() / (1.0 + static_cast<double>(norm1));
        const double phase = kTwoPi * rng.uniform();
        std::vector<int64_t> idx(nd, 0);
        for (int64_t i = 0; i < n; ++i) {
            double arg = phase;
            for (size_t d = 0; d < nd; ++d)
                arg += kTwoPi * freq[d] * static_cast<double>(idx[d]) /
                       static_cast<double>(extents[d]);
            out[static_cast<size_t>(i)] += amp * std::cos(arg);
            for (size_t d = nd; d-- > 0;) {
                if (++idx[d] < extents[d]) break;
                idx[d] = 0;
            }
        }
    }
    return out;
}

// Separable triangular blur with clamped borders, one axis at a time.
static void blur_axis(std::vector<double>& data, const Shape& extents, size_t axis, int radius) {
    const size_t nd = extents.size();
    int64_t n = 1;
    for (int64_t e : extents) n *= e;
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[static_cast<size_t>(k + radius)] = static_cast<double>(radius + 1 - std::abs(k));
        ksum += kernel[static_cast<size_t>(k + radius)];
    }
    for (double& v : kernel) v /= ksum;

    int64_t stride = 1;
    for (size_t d = axis + 1; d < nd; ++d) stride *= extents[d];
    const int64_t extent = extents[axis];
    std::vector<double> tmp(data.size());
    for (int64_t i = 0; i < n; ++i) {
        const int64_t pos = (i / stride) % extent;
        const int64_t line = i - pos * stride;
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            int64_t q = pos + k;
            q = std::max<int64_t>(0, std::min<int64_t>(extent - 1, q));
            acc += kernel[static_cast<size_t>(k + radius)] * data[static_cast<size_t>(line + q * stride)];
        }
        tmp[static_cast<size_t>(i)] = acc;
    }
    data.swap(tmp);
}

SynthCase generate_case(const SynthConfig& cfg, int64_t case_index) {
    cfg.validate();
    const size_t nd = cfg.extents.size();
    int64_t sp = 1;
    for (int64_t e : cfg.extents) sp *= e;
    const int c = cfg.num_classes;

    Rng rng(mix_seed({cfg.seed, 0xCA5EULL, static_cast<uint64_t>(case_index)}));

    // (1) Smooth per-class score fields; argmax gives the label map.
    std::vector<std::vector<double>> class_scores;
    class_scores.reserve(static_cast<size_t>(c));
    for (int k = 0; k < c; ++k) class_scores.push_back(smooth_field(cfg.extents, rng));

    Shape label_shape{1};
    for (int64_t e : cfg.extents) label_shape.push_back(e);
    LabelField labels(label_shape, 0);
    for (int64_t i = 0; i < sp; ++i) {
        int best = 0;
        double best_v = class_scores[0][static_cast<size_t>(i)];
        for (int k = 1; k < c; ++k)
            if (class_scores[static_cast<size_t>(k)][static_cast<size_t>(i)] > best_v) {
                best_v = class_scores[static_cast<size_t>(k)][static_cast<size_t>(i)];
                best = k;
            }
        labels.data[static_cast<size_t>(i)] = best;
    }

    // (2) Clean logits: a mix of the one-hot labels and their blur, so the
    // margin shrinks near boundaries but the true class always wins when
    // the noise level is zero.
    std::vector<std::vector<double>> blurred(static_cast<size_t>(c),
                                             std::vector<double>(static_cast<size_t>(sp), 0.0));
    for (int64_t i = 0; i < sp; ++i)
        blurred[static_cast<size_t>(labels.data[static_cast<size_t>(i)])][static_cast<size_t>(i)] = 1.0;
    for (int k = 0; k < c; ++k)
        for (size_t d = 0; d < nd; ++d)
            blur_axis(blurred[static_cast<size_t>(k)], cfg.extents, d, cfg.blur_radius);

    // Spatially varying noise amplitude (visible to the taps). The smooth
    // heteroscedastic field is amplified where the clean margin shrinks, so
    // errors concentrate at ambiguous interfaces.
    std::vector<double> het = smooth_field(cfg.extents, rng);
    for (double& v : het) v = kHetMin + (kHetMax - kHetMin) * sigmoid_scalar(2.0 * v);

    Shape logit_shape{1, c};
    for (int64_t e : cfg.extents) logit_shape.push_back(e);
    DenseField logits(logit_shape);
    // Pre-softmax latent: C logit channels plus the noise-amplitude channel.
    std::vector<double> latent(static_cast<size_t>((c + 1) * sp), 0.0);
    std::vector<double> clean(static_cast<size_t>(c), 0.0);
    for (int64_t i = 0; i < sp; ++i) {
        const int y = labels.data[static_cast<size_t>(i)];
        double top = -1e300, second = -1e300;
        for (int k = 0; k < c; ++k) {
            const double mix =
                kSelfMix * (k == y ? 1.0 : 0.0) +
                (1.0 - kSelfMix) * blurred[static_cast<size_t>(k)][static_cast<size_t>(i)];
            clean[static_cast<size_t>(k)] = kLogitGain * mix;
            if (mix > top) {
                second = top;
                top = mix;
            } else if (mix > second) {
                second = mix;
            }
        }
        const double amp = 1.0 + (kBoundaryAmp - 1.0) * (1.0 - (top - second));
        const double sigma = het[static_cast<size_t>(i)] * amp;
        for (int k = 0; k < c; ++k) {
            const double noisy =
                clean[static_cast<size_t>(k)] + cfg.noise_level * sigma * rng.normal();
            latent[static_cast<size_t>(k * sp + i)] = noisy;
            logits.data[static_cast<size_t>(k * sp + i)] =
                static_cast<float>(kOverconfidence * noisy);
        }
        latent[static_cast<size_t>(c * sp + i)] = sigma;
    }

    // (3) Taps: fixed seeded linear transforms of the latent plus per-tap
    // noise. The transform weights depend only on the config seed.
    Rng backbone_rng(mix_seed({cfg.seed, 0xBAC8B04EULL}));
    std::vector<std::vector<double>> tap_weights;
    for (size_t t = 0; t < cfg.tap_channels.size(); ++t) {
        std::vector<double> w(static_cast<size_t>(cfg.tap_channels[t] * (c + 1)));
        const double scale = 1.0 / std::sqrt(static_cast<double>(c + 1));
        for (double& v : w) v = scale * backbone_rng.normal();
        tap_weights.push_back(std::move(w));
    }

    SynthCase out;
    out.id = case_index;
    out.labels = std::move(labels);
    out.logits = std::move(logits);
    out.logits.ensure_finite("synthetic logits");

    for (size_t t = 0; t < cfg.tap_channels.size(); ++t) {
        const int fc = cfg.tap_channels[t];
        const int stride = cfg.tap_strides[t];
        std::vector<double> full(static_cast<size_t>(fc * sp), 0.0);
        const std::vector<double>& w = tap_weights[t];
        for (int f = 0; f < fc; ++f)
            for (int k = 0; k <= c; ++k) {
                const double wv = w[static_cast<size_t>(f * (c + 1) + k)];
                const double* src = latent.data() + k * sp;
                double* dst = full.data() + f * sp;
                for (int64_t i = 0; i < sp; ++i) dst[i] += wv * src[i];
            }
        for (double& v : full) v += kTapNoise * rng.normal();

        Shape tap_extents = cfg.extents;
        for (int64_t& e : tap_extents) e /= stride;
        Shape tap_shape{1, fc};
        for (int64_t e : tap_extents) tap_shape.push_back(e);
        DenseField tap(tap_shape);
        if (stride == 1) {
            for (size_t i = 0; i < full.size(); ++i) tap.data[i] = static_cast<float>(full[i]);
        } else {
            // Average pooling over stride-sized blocks.
            int64_t coarse_sp = 1;
            for (int64_t e : tap_extents) coarse_sp *= e;
            const double inv_block = 1.0 / std::pow(static_cast<double>(stride),
                                                    static_cast<double>(nd));
            std::vector<int64_t> cidx(nd, 0);
            for (int64_t ci = 0; ci < coarse_sp; ++ci) {
                std::vector<int64_t> base(nd);
                for (size_t d = 0; d < nd; ++d) base[d] = cidx[d] * stride;
                int64_t block = 1;
                for (size_t d = 0; d < nd; ++d) block *= stride;
                for (int f = 0; f < fc; ++f) {
                    double acc = 0.0;
                    for (int64_t bi = 0; bi < block; ++bi) {
                        int64_t rem = bi, flat = 0;
                        for (size_t d = 0; d < nd; ++d) {
                            int64_t step = 1;
                            for (size_t dd = d + 1; dd < nd; ++dd) step *= stride;
                            const int64_t off = rem / step;
                            rem %= step;
                            flat = flat * cfg.extents[d] + (base[d] + off);
                        }
                        acc += full[static_cast<size_t>(f * sp + flat)];
                    }
                    tap.data[static_cast<size_t>(f * coarse_sp + ci)] =
                        static_cast<float>(acc * inv_block);
                }
                for (size_t d = nd; d-- > 0;) {
                    if (++cidx[d] < tap_extents[d]) break;
                    cidx[d] = 0;
                }
            }
        }
        tap.ensure_finite("synthetic tap");
        out.taps.push_back(std::move(tap));
    }
    return out;
}

std::vector<SynthCase> generate_split(const SynthConfig& cfg, int n_cases,
                                      const std::string& split_tag) {
    const int64_t offset = split_offset(split_tag);
    std::vector<SynthCase> out;
    out.reserve(static_cast<size_t>(std::max(0, n_cases)));
    for (int i = 0; i < n_cases; ++i) out.push_back(generate_case(cfg, offset + i));
    return out;
}

}  // namespace swu
