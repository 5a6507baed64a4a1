#include "trailmark/mask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trailmark/errors.hpp"

namespace trailmark {

std::vector<Quad> build_quads(const ProjectedTrajectory& traj) {
    std::vector<Quad> quads;
    for (const auto& wheel : traj.wheels) {
        for (std::size_t k = 0; k + 1 < wheel.size(); ++k) {
            const TrajectorySample& a = wheel[k];
            const TrajectorySample& b = wheel[k + 1];
            if (!a.in_frustum || !b.in_frustum || a.occluded || b.occluded) continue;
            quads.push_back(Quad{{a.inner_image, a.outer_image, b.outer_image, b.inner_image}});
        }
    }
    return quads;
}

bool point_in_quad(const Quad& quad, double u, double v) {
    bool inside = false;
    for (int i = 0; i < 4; ++i) {
        const ImagePoint& a = quad.corners[i];
        const ImagePoint& b = quad.corners[(i + 1) % 4];
        const double cross = (b.u - a.u) * (v - a.v) - (b.v - a.v) * (u - a.u);
        // Collinear with the edge and within its bounding box: on the
        // boundary, which counts as inside regardless of parity.
        if (cross == 0.0 && u >= std::min(a.u, b.u) && u <= std::max(a.u, b.u) &&
            v >= std::min(a.v, b.v) && v <= std::max(a.v, b.v)) {
            return true;
        }
        if ((a.v > v) != (b.v > v)) {
            // The ray toward +u crosses this edge strictly to the right of
            // the query point; the sign test avoids the division.
            if (b.v > a.v ? cross > 0.0 : cross < 0.0) inside = !inside;
        }
    }
    return inside;
}

BinaryMask rasterize(const std::vector<Quad>& quads, int width, int height) {
    BinaryMask mask(width, height);
    for (const Quad& quad : quads) {
        double lo_u = quad.corners[0].u, hi_u = lo_u;
        double lo_v = quad.corners[0].v, hi_v = lo_v;
        for (const ImagePoint& c : quad.corners) {
            lo_u = std::min(lo_u, c.u);
            hi_u = std::max(hi_u, c.u);
            lo_v = std::min(lo_v, c.v);
            hi_v = std::max(hi_v, c.v);
        }
        const int x0 = std::max(0, static_cast<int>(std::ceil(lo_u)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(hi_u)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(lo_v)));
        const int y1 = std::min(height - 1, static_cast<int>(std::floor(hi_v)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (mask.at(x, y)) continue;
                if (point_in_quad(quad, x, y)) mask.at(x, y) = 1;
            }
        }
    }
    return mask;
}

BinaryMask apply_vehicle_mask(const BinaryMask& mask, const BinaryMask& vehicle) {
    if (mask.width != vehicle.width || mask.height != vehicle.height) {
        throw DimensionMismatchError("vehicle mask is " + std::to_string(vehicle.width) + "x" +
                                     std::to_string(vehicle.height) + ", image mask is " +
                                     std::to_string(mask.width) + "x" +
                                     std::to_string(mask.height));
    }
    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        if (vehicle.data[i]) out.data[i] = 0;
    }
    return out;
}

}  // namespace trailmark
