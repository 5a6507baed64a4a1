#pragma once

#include <cstdint>
#include <vector>

#include "trailmark/image.hpp"

namespace trailmark {

/// Per-pixel risk in [0, 1]; 0 is low risk, 1 is high risk.
struct RiskMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    RiskMap() = default;
    RiskMap(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel channel-mean squared reconstruction error (unnormalized).
struct ErrorMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;
};

/// Evaluation-set-global affine normalization constants: minimum and
/// nearest-rank 99th percentile of all pixel errors.
struct NormalizationConstants {
    double min = 0.0;
    double p99 = 0.0;
};

struct RiskThreshold {
    double theta = 0.0;  // in [0, 1]
    double tpr = 0.0;    // at selection
    double fpr = 0.0;
};

ErrorMap error_map(const ImageTensor& x, const ImageTensor& xhat);

/// Throws EmptyDatasetError when the set holds no pixels.
NormalizationConstants compute_normalization(const std::vector<ErrorMap>& maps);

/// risk = clamp((e - min) / (p99 - min), 0, 1); a degenerate range maps
/// everything to zero.
RiskMap normalize(const ErrorMap& errors, const NormalizationConstants& nc);

/// Operating threshold: minimizes sqrt((1-TPR)^2 + FPR^2) over candidate
/// thresholds (midpoints of consecutive distinct sorted scores plus the
/// sentinels 0 and 1); ties break toward the smaller theta. labels: 1 =
/// positive (high risk), 0 = negative.
RiskThreshold select_threshold(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& labels);

/// 1 = HighRisk, exactly when risk > theta (strict).
BinaryMask classify(const RiskMap& risk, double theta);

}  // namespace trailmark
