#include "trailmark/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trailmark/errors.hpp"

namespace trailmark {

namespace {

void check_label_counts(const std::vector<std::uint8_t>& labels) {
    std::size_t positives = 0, negatives = 0;
    for (const std::uint8_t l : labels) (l ? positives : negatives)++;
    if (positives == 0 || negatives == 0) {
        throw DegenerateLabelsError("need at least one positive and one negative label");
    }
}

void check_eval_dims(const std::vector<RiskMap>& risks,
                     const std::vector<SemanticLabelMap>& labels) {
    if (risks.size() != labels.size()) {
        throw DimensionMismatchError("risk map and label map counts differ");
    }
    for (std::size_t i = 0; i < risks.size(); ++i) {
        if (risks[i].width != labels[i].width || risks[i].height != labels[i].height) {
            throw DimensionMismatchError("risk map and label map dimensions differ");
        }
    }
}

}  // namespace

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionMismatchError("scores and labels differ in length");
    }
    check_label_counts(labels);
    double positives = 0, negatives = 0;
    for (const std::uint8_t l : labels) (l ? positives : negatives)++;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // Tied scores move together: one operating point per distinct score.
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] ? tp : fp)++;
            ++i;
        }
        curve.points.push_back({fp / negatives, tp / positives});
    }
    return curve;
}

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    const RocCurve curve = roc_curve(scores, labels);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const RocPoint& a = curve.points[i - 1];
        const RocPoint& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

IntersectionReport intersection_metrics(const BinaryMask& high_risk,
                                        const SemanticLabelMap& labels,
                                        const LabelClassMap& cmap) {
    if (high_risk.width != labels.width || high_risk.height != labels.height) {
        throw DimensionMismatchError("prediction and label map dimensions differ");
    }
    std::size_t ground = 0, ground_low = 0, vegetation = 0, vegetation_high = 0;
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        const std::uint8_t l = labels.data[i];
        if (l == cmap.ground) {
            ++ground;
            if (!high_risk.data[i]) ++ground_low;
        } else if (l == cmap.vegetation) {
            ++vegetation;
            if (high_risk.data[i]) ++vegetation_high;
        }
    }
    if (ground == 0 && vegetation == 0) {
        throw NoLabeledPixelsError("label map holds no ground or vegetation pixels");
    }
    IntersectionReport report;
    if (ground > 0) {
        report.ground_low_risk_percent =
            100.0 * static_cast<double>(ground_low) / static_cast<double>(ground);
    }
    if (vegetation > 0) {
        report.vegetation_high_risk_percent =
            100.0 * static_cast<double>(vegetation_high) / static_cast<double>(vegetation);
    }
    return report;
}

RegionHistograms region_histograms(const std::vector<RiskMap>& risks,
                                   const std::vector<SemanticLabelMap>& labels, int bins,
                                   const LabelClassMap& cmap) {
    if (bins < 1) throw DimensionMismatchError("bins must be >= 1");
    check_eval_dims(risks, labels);

    RegionHistograms h;
    h.ground.assign(bins, 0);
    h.vegetation.assign(bins, 0);
    bool any = false;
    for (std::size_t f = 0; f < risks.size(); ++f) {
        for (std::size_t i = 0; i < risks[f].data.size(); ++i) {
            const std::uint8_t l = labels[f].data[i];
            if (l != cmap.ground && l != cmap.vegetation) continue;
            const double v = risks[f].data[i];
            if (!any) {
                h.lo = h.hi = v;
                any = true;
            } else {
                h.lo = std::min(h.lo, v);
                h.hi = std::max(h.hi, v);
            }
        }
    }
    if (!any) throw NoLabeledPixelsError("no labeled pixels for histograms");

    const double range = h.hi - h.lo;
    for (std::size_t f = 0; f < risks.size(); ++f) {
        for (std::size_t i = 0; i < risks[f].data.size(); ++i) {
            const std::uint8_t l = labels[f].data[i];
            if (l != cmap.ground && l != cmap.vegetation) continue;
            int bin = 0;
            if (range > 0.0) {
                bin = static_cast<int>((risks[f].data[i] - h.lo) / range * bins);
                bin = std::min(bin, bins - 1);  // top edge lands in the last bin
            }
            (l == cmap.ground ? h.ground : h.vegetation)[bin]++;
        }
    }
    return h;
}

void pixel_scores(const std::vector<RiskMap>& risks,
                  const std::vector<SemanticLabelMap>& labels, const LabelClassMap& cmap,
                  std::vector<double>& scores, std::vector<std::uint8_t>& out_labels) {
    check_eval_dims(risks, labels);
    scores.clear();
    out_labels.clear();
    for (std::size_t f = 0; f < risks.size(); ++f) {
        for (std::size_t i = 0; i < risks[f].data.size(); ++i) {
            const std::uint8_t l = labels[f].data[i];
            if (l == cmap.ground) {
                scores.push_back(risks[f].data[i]);
                out_labels.push_back(0);
            } else if (l == cmap.vegetation) {
                scores.push_back(risks[f].data[i]);
                out_labels.push_back(1);
            }
        }
    }
}

void image_scores(const std::vector<RiskMap>& risks,
                  const std::vector<SemanticLabelMap>& labels, const LabelClassMap& cmap,
                  std::vector<double>& scores, std::vector<std::uint8_t>& out_labels) {
    check_eval_dims(risks, labels);
    scores.clear();
    out_labels.clear();
    for (std::size_t f = 0; f < risks.size(); ++f) {
        double ground_sum = 0.0, veg_sum = 0.0;
        std::size_t ground_n = 0, veg_n = 0;
        for (std::size_t i = 0; i < risks[f].data.size(); ++i) {
            const std::uint8_t l = labels[f].data[i];
            if (l == cmap.ground) {
                ground_sum += risks[f].data[i];
                ++ground_n;
            } else if (l == cmap.vegetation) {
                veg_sum += risks[f].data[i];
                ++veg_n;
            }
        }
        if (ground_n > 0) {
            scores.push_back(ground_sum / static_cast<double>(ground_n));
            out_labels.push_back(0);
        }
        if (veg_n > 0) {
            scores.push_back(veg_sum / static_cast<double>(veg_n));
            out_labels.push_back(1);
        }
    }
}

}  // namespace trailmark
