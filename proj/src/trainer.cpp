#include "swu/trainer.hpp"

#include "swu/metrics.hpp"
#include "swu/rng.hpp"

#include <cmath>

namespace swu {

void TrainConfig::validate() const {
    optim.validate();
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (early_stop_tolerance < 1) throw ConfigError("train: early_stop_tolerance must be >= 1");
    weights.validate();
    hyper.validate();
    head.validate();
}

double mean_ranking_aurc(const std::vector<CaseData>& cases, const ParamStore& params,
                         const HeadConfig& cfg) {
    if (cases.empty()) throw ConfigError("mean_ranking_aurc: empty split");
    double acc = 0.0;
    for (const CaseData& cs : cases) {
        UncertaintyBundle b = infer_bundle(cs, params, cfg);
        const DenseField& score = ranking_score(b, cfg);
        std::vector<double> u(score.data.begin(), score.data.end());
        DenseField e = error_indicator(cs.logits, cs.labels);
        std::vector<uint8_t> ev(e.data.size());
        for (size_t i = 0; i < e.data.size(); ++i) ev[i] = e.data[i] != 0.0f ? 1 : 0;
        acc += aurc(risk_coverage_curve(u, ev));
    }
    return acc / static_cast<double>(cases.size());
}

TrainResult train_head(const std::vector<CaseData>& train_cases,
                       const std::vector<CaseData>& val_cases, const TrainConfig& cfg) {
    cfg.validate();
    if (train_cases.empty()) throw ConfigError("train_head: empty training split");
    if (val_cases.empty()) throw ConfigError("train_head: empty validation split");

    std::vector<int> tap_channels;
    for (const DenseField& t : train_cases[0].taps)
        tap_channels.push_back(static_cast<int>(t.channels()));
    const int num_classes = static_cast<int>(train_cases[0].logits.channels());

    TrainResult result;
    result.params = init_head_params(cfg.head, tap_channels, num_classes,
                                     mix_seed({cfg.seed, 0x494E4954ULL}));
    result.initial_params = result.params;

    AdamW opt(cfg.optim);
    TrainHistory& hist = result.history;
    hist.initial_val_score = mean_ranking_aurc(val_cases, result.params, cfg.head);
    hist.best_val_score = hist.initial_val_score;
    hist.best_epoch = 0;
    ParamStore best_params = result.params;

    ParamStore params = result.params;
    int patience = 0;
    std::vector<size_t> order(train_cases.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr = cosine_lr(epoch - 1, cfg.max_epochs, cfg.optim.lr_max, cfg.optim.lr_min);

        // Seeded shuffle of the case order for this epoch.
        {
            Rng rng(mix_seed({cfg.seed, 0x53485546ULL, static_cast<uint64_t>(epoch)}));
            for (size_t i = order.size(); i > 1; --i) {
                const size_t j = static_cast<size_t>(rng.uniform_index(i));
                std::swap(order[i - 1], order[j]);
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        int64_t steps = 0;
        for (size_t oi : order) {
            const CaseData& cs = train_cases[oi];
            Tape tape;
            HeadForward fw = build_head_forward(tape, cs.taps, cs.logits, params, cfg.head);
            const uint64_t pair_seed = mix_seed({cfg.seed, 0x50524E47ULL,
                                                 static_cast<uint64_t>(epoch),
                                                 static_cast<uint64_t>(cs.id)});
            LossBreakdown loss =
                build_total_loss(tape, fw, cs, cfg.head, cfg.weights, cfg.hyper, pair_seed);
            for (const auto& [name, value] : loss.terms) rec.terms[name] += value;
            ++steps;
            if (!loss.total.valid()) continue;  // no active terms: nothing to optimize
            const double total = tape.scalar_value(loss.total);
            if (!std::isfinite(total))
                throw NumericError("train_head: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", case " + std::to_string(cs.id));
            tape.backward(loss.total);
            GradStore grads = tape.param_grads();
            clip_gradients(grads, cfg.optim.clip_norm);
            opt.step(params, grads, lr);
        }
        for (auto& [name, value] : rec.terms) value /= static_cast<double>(steps);
        rec.total_loss = rec.terms.count("total") ? rec.terms["total"] : 0.0;

        rec.val_score = mean_ranking_aurc(val_cases, params, cfg.head);
        hist.epochs.push_back(rec);

        if (rec.val_score < hist.best_val_score) {
            hist.best_val_score = rec.val_score;
            hist.best_epoch = epoch;
            best_params = params;
            patience = 0;
        } else if (++patience >= cfg.early_stop_tolerance) {
            break;
        }
    }

    round_params_f32(best_params);
    result.params = std::move(best_params);
    return result;
}

}  // namespace swu
