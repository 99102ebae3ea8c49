#include "swu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace swu {

double dice(const LabelField& pred, const LabelField& gt, int num_classes) {
    if (!same_shape(pred.shape, gt.shape)) throw ShapeError("dice: shape mismatch");
    if (num_classes < 2) throw ShapeError("dice: need at least 2 classes");
    for (int32_t v : pred.data)
        if (v < 0 || v >= num_classes) throw ShapeError("dice: prediction label out of range");
    for (int32_t v : gt.data)
        if (v < 0 || v >= num_classes) throw ShapeError("dice: ground-truth label out of range");

    double sum = 0.0;
    int present = 0;
    for (int c = 1; c < num_classes; ++c) {
        int64_t np = 0, ng = 0, ni = 0;
        for (size_t i = 0; i < pred.data.size(); ++i) {
            const bool p = pred.data[i] == c;
            const bool g = gt.data[i] == c;
            np += p;
            ng += g;
            ni += p && g;
        }
        if (np + ng == 0) continue;  // absent from both masks
        sum += 2.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
        ++present;
    }
    return present == 0 ? 1.0 : sum / static_cast<double>(present);
}

double brier(const DenseField& probs, const LabelField& labels) {
    const int64_t b = probs.batch(), c = probs.channels(), sp = probs.spatial_numel();
    if (labels.numel() != b * sp) throw ShapeError("brier: label count mismatch");
    double acc = 0.0;
    for (int64_t nb = 0; nb < b; ++nb) {
        const float* base = probs.data.data() + nb * c * sp;
        for (int64_t i = 0; i < sp; ++i) {
            const int32_t y = labels.data[static_cast<size_t>(nb * sp + i)];
            if (y < 0 || y >= c) throw ShapeError("brier: label out of range");
            for (int64_t k = 0; k < c; ++k) {
                const double d = static_cast<double>(base[k * sp + i]) - (k == y ? 1.0 : 0.0);
                acc += d * d;
            }
        }
    }
    return acc / static_cast<double>(b * sp);
}

std::optional<double> auroc(const std::vector<double>& u, const std::vector<uint8_t>& e) {
    if (u.size() != e.size()) throw ShapeError("auroc: score/label count mismatch");
    const size_t n = u.size();
    int64_t n1 = 0;
    for (uint8_t v : e) n1 += v ? 1 : 0;
    const int64_t n0 = static_cast<int64_t>(n) - n1;
    if (n1 == 0 || n0 == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (u[a] != u[b]) return u[a] < u[b];
        return a < b;
    });
    // Mid-ranks for tied scores.
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && u[order[j + 1]] == u[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (size_t k = 0; k < n; ++k)
        if (e[k]) rank_sum += rank[k];
    const double np1 = static_cast<double>(n1);
    return (rank_sum - np1 * (np1 + 1.0) / 2.0) / (np1 * static_cast<double>(n0));
}

RiskCoverageCurve risk_coverage_curve(const std::vector<double>& u,
                                      const std::vector<uint8_t>& e) {
    if (u.size() != e.size()) throw ShapeError("risk_coverage_curve: size mismatch");
    if (u.empty()) throw ShapeError("risk_coverage_curve: empty input");
    const size_t n = u.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (u[a] != u[b]) return u[a] < u[b];
        return a < b;
    });
    RiskCoverageCurve curve;
    curve.coverage.resize(n);
    curve.risk.resize(n);
    int64_t errors = 0;
    for (size_t k = 0; k < n; ++k) {
        errors += e[order[k]] ? 1 : 0;
        curve.coverage[k] = static_cast<double>(k + 1) / static_cast<double>(n);
        curve.risk[k] = static_cast<double>(errors) / static_cast<double>(k + 1);
    }
    return curve;
}

double aurc(const RiskCoverageCurve& curve) {
    const size_t n = curve.coverage.size();
    if (n == 0 || curve.risk.size() != n) throw ShapeError("aurc: malformed curve");
    double area = 0.0;
    for (size_t k = 0; k + 1 < n; ++k)
        area += 0.5 * (curve.risk[k] + curve.risk[k + 1]) *
                (curve.coverage[k + 1] - curve.coverage[k]);
    return area;
}

std::pair<RiskCoverageCurve, RiskCoverageCurve> reference_curves(const std::vector<uint8_t>& e) {
    if (e.empty()) throw ShapeError("reference_curves: empty input");
    const size_t n = e.size();
    double mean = 0.0;
    for (uint8_t v : e) mean += v ? 1.0 : 0.0;
    mean /= static_cast<double>(n);

    RiskCoverageCurve random;
    random.provenance = CurveProvenance::Random;
    random.coverage.resize(n);
    random.risk.assign(n, mean);
    for (size_t k = 0; k < n; ++k)
        random.coverage[k] = static_cast<double>(k + 1) / static_cast<double>(n);

    std::vector<double> oracle_scores(n);
    for (size_t k = 0; k < n; ++k) oracle_scores[k] = e[k] ? 1.0 : 0.0;
    RiskCoverageCurve oracle = risk_coverage_curve(oracle_scores, e);
    oracle.provenance = CurveProvenance::Oracle;
    return {random, oracle};
}

std::vector<AccThresholdPoint> accuracy_threshold_curve(const DenseField& probs,
                                                        const LabelField& labels) {
    const int64_t b = probs.batch(), c = probs.channels(), sp = probs.spatial_numel();
    if (labels.numel() != b * sp) throw ShapeError("accuracy_threshold_curve: label mismatch");
    const int64_t n = b * sp;
    std::vector<double> conf(static_cast<size_t>(n));
    std::vector<uint8_t> correct(static_cast<size_t>(n));
    LabelField pred = argmax_channel(probs);
    for (int64_t nb = 0; nb < b; ++nb) {
        const float* base = probs.data.data() + nb * c * sp;
        for (int64_t i = 0; i < sp; ++i) {
            double mx = base[i];
            for (int64_t k = 1; k < c; ++k) mx = std::max(mx, static_cast<double>(base[k * sp + i]));
            conf[static_cast<size_t>(nb * sp + i)] = mx;
            correct[static_cast<size_t>(nb * sp + i)] =
                pred.data[static_cast<size_t>(nb * sp + i)] ==
                labels.data[static_cast<size_t>(nb * sp + i)];
        }
    }
    std::vector<AccThresholdPoint> out;
    out.reserve(101);
    for (int k = 0; k <= 100; ++k) {
        AccThresholdPoint pt;
        pt.threshold = static_cast<double>(k) / 100.0;
        int64_t kept = 0, good = 0;
        for (int64_t i = 0; i < n; ++i) {
            if (conf[static_cast<size_t>(i)] >= pt.threshold) {
                ++kept;
                good += correct[static_cast<size_t>(i)];
            }
        }
        pt.retained_fraction = static_cast<double>(kept) / static_cast<double>(n);
        if (kept > 0) pt.accuracy = static_cast<double>(good) / static_cast<double>(kept);
        out.push_back(pt);
    }
    return out;
}

DenseField entropy_score(const DenseField& probs) {
    const int64_t b = probs.batch(), c = probs.channels(), sp = probs.spatial_numel();
    Shape shape{b, 1};
    for (size_t d = 2; d < probs.shape.size(); ++d) shape.push_back(probs.shape[d]);
    DenseField out(shape);
    for (int64_t nb = 0; nb < b; ++nb) {
        const float* base = probs.data.data() + nb * c * sp;
        float* dst = out.data.data() + nb * sp;
        for (int64_t i = 0; i < sp; ++i) {
            double acc = 0.0;
            for (int64_t k = 0; k < c; ++k) {
                const double v = static_cast<double>(base[k * sp + i]);
                if (v > 0.0) acc -= v * std::log(v);
            }
            dst[i] = static_cast<float>(acc);
        }
    }
    return out;
}

static double mean_nll_at_temperature(const std::vector<DenseField>& logits,
                                      const std::vector<LabelField>& labels, double t) {
    double acc = 0.0;
    int64_t count = 0;
    for (size_t n = 0; n < logits.size(); ++n) {
        const DenseField& z = logits[n];
        const LabelField& y = labels[n];
        const int64_t b = z.batch(), c = z.channels(), sp = z.spatial_numel();
        if (y.numel() != b * sp) throw ShapeError("fit_temperature: label mismatch");
        for (int64_t nb = 0; nb < b; ++nb) {
            const float* base = z.data.data() + nb * c * sp;
            for (int64_t i = 0; i < sp; ++i) {
                double mx = -1e300;
                for (int64_t k = 0; k < c; ++k)
                    mx = std::max(mx, static_cast<double>(base[k * sp + i]) / t);
                double denom = 0.0;
                for (int64_t k = 0; k < c; ++k)
                    denom += std::exp(static_cast<double>(base[k * sp + i]) / t - mx);
                const int32_t yy = y.data[static_cast<size_t>(nb * sp + i)];
                const double zy = static_cast<double>(base[yy * sp + i]) / t - mx;
                acc -= zy - std::log(denom);
                ++count;
            }
        }
    }
    return acc / static_cast<double>(count);
}

double fit_temperature(const std::vector<DenseField>& logits,
                       const std::vector<LabelField>& labels) {
    if (logits.empty() || logits.size() != labels.size())
        throw ShapeError("fit_temperature: empty or mismatched validation set");
    double a = std::log(0.05), b = std::log(20.0);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = mean_nll_at_temperature(logits, labels, std::exp(x1));
    double f2 = mean_nll_at_temperature(logits, labels, std::exp(x2));
    while (b - a > 1e-4) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = mean_nll_at_temperature(logits, labels, std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = mean_nll_at_temperature(logits, labels, std::exp(x2));
        }
    }
    return std::exp(0.5 * (a + b));
}

std::string case_metrics_csv_header() {
    return "case_id,method,dice,brier,auroc,aurc";
}

std::string case_metrics_csv_row(const CaseMetrics& m, const std::string& method) {
    char buf[256];
    if (m.auroc.has_value()) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%.10g,%.10g,%.10g", m.case_id.c_str(),
                      method.c_str(), m.dice, m.brier, *m.auroc, m.aurc);
    } else {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%.10g,,%.10g", m.case_id.c_str(),
                      method.c_str(), m.dice, m.brier, m.aurc);
    }
    return std::string(buf);
}

}  // namespace swu
