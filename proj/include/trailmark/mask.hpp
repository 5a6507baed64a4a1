#pragma once

#include <array>
#include <vector>

#include "trailmark/geometry.hpp"
#include "trailmark/image.hpp"
#include "trailmark/trajectory.hpp"

namespace trailmark {

/// One wheel-track segment in image space. Corners are ordered
/// (inner_t, outer_t, outer_{t+1}, inner_{t+1}); the even-odd rule handles
/// the self-intersecting orders that show up at sharp turns.
struct Quad {
    std::array<ImagePoint, 4> corners;
};

/// One quad per wheel per consecutive sample pair whose endpoints are all
/// in-frustum and non-occluded; trajectory order is preserved.
std::vector<Quad> build_quads(const ProjectedTrajectory& traj);

/// Even-odd containment test with the boundary counted as inside.
bool point_in_quad(const Quad& quad, double u, double v);

/// Pixel centers sit at integer coordinates; a pixel is set when its center
/// lies inside or on the boundary of any quad. Quads are clipped to the
/// image bounds.
BinaryMask rasterize(const std::vector<Quad>& quads, int width, int height);

/// output pixel = mask AND NOT vehicle. Throws DimensionMismatchError.
BinaryMask apply_vehicle_mask(const BinaryMask& mask, const BinaryMask& vehicle);

}  // namespace trailmark
