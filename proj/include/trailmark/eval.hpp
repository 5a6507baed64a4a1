#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "trailmark/image.hpp"
#include "trailmark/risk.hpp"

namespace trailmark {

/// Class-id meanings for SemanticLabelMap pixels, declared in config.
struct LabelClassMap {
    std::uint8_t unlabeled = 0;
    std::uint8_t ground = 1;
    std::uint8_t vegetation = 2;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Operating points from (0,0) to (1,1); one point per distinct score,
/// swept descending, plus both endpoints. FPR and TPR are non-decreasing.
struct RocCurve {
    std::vector<RocPoint> points;
};

/// Intersection percentages against semantic labels; a field is empty when
/// its class has no labeled pixels (reported as missing, not 0). The AUROC
/// is filled by callers that hold the underlying scores.
struct IntersectionReport {
    std::optional<double> ground_low_risk_percent;
    std::optional<double> vegetation_high_risk_percent;
    std::optional<double> auroc;
};

struct RegionHistograms {
    double lo = 0.0, hi = 0.0;  // shared bin range over labeled pixels
    std::vector<std::uint64_t> ground;
    std::vector<std::uint64_t> vegetation;
};

/// labels: 1 = positive. Throws DegenerateLabelsError without both classes.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Trapezoidal area under roc_curve; equals the pairwise probability
/// P(score_pos > score_neg) + 0.5 * P(tie).
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// high_risk: 1 = HighRisk prediction. Unlabeled pixels are excluded.
IntersectionReport intersection_metrics(const BinaryMask& high_risk,
                                        const SemanticLabelMap& labels,
                                        const LabelClassMap& cmap = {});

/// Per-class counts over `bins` uniform bins spanning the labeled pixels'
/// value range (identical edges for both classes; the top edge is
/// inclusive). Throws NoLabeledPixelsError when nothing is labeled.
RegionHistograms region_histograms(const std::vector<RiskMap>& risks,
                                   const std::vector<SemanticLabelMap>& labels, int bins,
                                   const LabelClassMap& cmap = {});

/// Pixel-granularity scores/labels for ROC: every ground pixel is a
/// negative, every vegetation pixel a positive; unlabeled pixels skipped.
void pixel_scores(const std::vector<RiskMap>& risks,
                  const std::vector<SemanticLabelMap>& labels, const LabelClassMap& cmap,
                  std::vector<double>& scores, std::vector<std::uint8_t>& out_labels);

/// Image granularity: one score per (frame, class present) pair — the mean
/// risk over that class's region.
void image_scores(const std::vector<RiskMap>& risks,
                  const std::vector<SemanticLabelMap>& labels, const LabelClassMap& cmap,
                  std::vector<double>& scores, std::vector<std::uint8_t>& out_labels);

}  // namespace trailmark
