#include "trailmark/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trailmark/errors.hpp"

namespace trailmark {

ErrorMap error_map(const ImageTensor& x, const ImageTensor& xhat) {
    if (x.width != xhat.width || x.height != xhat.height || x.channels != xhat.channels) {
        throw DimensionMismatchError("image pair dimensions differ");
    }
    ErrorMap e;
    e.width = x.width;
    e.height = x.height;
    e.data.resize(x.pixel_count());
    for (int y = 0; y < x.height; ++y) {
        for (int xx = 0; xx < x.width; ++xx) {
            double pix = 0.0;
            for (int c = 0; c < x.channels; ++c) {
                const double d = xhat.at(xx, y, c) - x.at(xx, y, c);
                pix += d * d;
            }
            e.data[static_cast<std::size_t>(y) * x.width + xx] = pix / x.channels;
        }
    }
    return e;
}

NormalizationConstants compute_normalization(const std::vector<ErrorMap>& maps) {
    std::vector<double> all;
    for (const ErrorMap& m : maps) all.insert(all.end(), m.data.begin(), m.data.end());
    if (all.empty()) throw EmptyDatasetError("no pixels to normalize");
    std::sort(all.begin(), all.end());
    NormalizationConstants nc;
    nc.min = all.front();
    // Nearest-rank percentile: the k-th smallest with k = ceil(0.99 * N).
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(0.99 * static_cast<double>(all.size())));
    nc.p99 = all[std::max<std::size_t>(k, 1) - 1];
    return nc;
}

RiskMap normalize(const ErrorMap& errors, const NormalizationConstants& nc) {
    RiskMap risk(errors.width, errors.height);
    const double range = nc.p99 - nc.min;
    if (range <= 0.0) return risk;  // constant input -> all zero
    for (std::size_t i = 0; i < errors.data.size(); ++i) {
        risk.data[i] = std::min(1.0, std::max(0.0, (errors.data[i] - nc.min) / range));
    }
    return risk;
}

RiskThreshold select_threshold(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionMismatchError("scores and labels differ in length");
    }
    std::size_t positives = 0, negatives = 0;
    for (const std::uint8_t l : labels) (l ? positives : negatives)++;
    if (positives == 0 || negatives == 0) {
        throw DegenerateLabelsError("need at least one positive and one negative label");
    }

    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates;
    candidates.push_back(0.0);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());

    RiskThreshold best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const double theta : candidates) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] > theta) (labels[i] ? tp : fp)++;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        const double dist = std::sqrt((1.0 - tpr) * (1.0 - tpr) + fpr * fpr);
        if (dist < best_dist) {  // strict: ties keep the smaller theta
            best_dist = dist;
            best = {theta, tpr, fpr};
        }
    }
    return best;
}

BinaryMask classify(const RiskMap& risk, double theta) {
    BinaryMask out(risk.width, risk.height);
    for (std::size_t i = 0; i < risk.data.size(); ++i) {
        out.data[i] = risk.data[i] > theta ? 1 : 0;
    }
    return out;
}

}  // namespace trailmark
