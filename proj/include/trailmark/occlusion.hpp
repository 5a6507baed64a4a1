#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "trailmark/geometry.hpp"
#include "trailmark/trajectory.hpp"

namespace trailmark {

/// Metric of the nearest-neighbor search: squared distance in
/// (azimuth, elevation) with azimuth wrapped across the +-pi seam.
inline double angular_distance_sq(double az1, double el1, double az2, double el2) {
    const double da = wrap_angle(az1 - az2);
    const double de = el1 - el2;
    return da * da + de * de;
}

enum class PointClass : std::uint8_t {
    Surface = 0,
    Obstacle = 1,
    Ground = 2,
};

/// LIDAR returns in the camera frame at the image timestamp.
/// `classes` is either empty (unclassified cloud) or one entry per point.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<std::uint8_t> classes;

    bool has_classes() const { return !classes.empty(); }
};

struct OcclusionParams {
    double rho = 0.35;  // relative radial threshold
    // Classes admitted into the index. Ground returns sit on the wheel track
    // itself and would trip the radial test everywhere, so they are excluded
    // by default.
    bool use_surface = true;
    bool use_obstacle = true;
    bool use_ground = false;
    // Optional cap on the angular distance between a wheel point and its
    // nearest neighbor; beyond it the neighbor is not treated as an occluder.
    // <= 0 disables the cutoff.
    double max_angle = 0.0;

    bool class_used(std::uint8_t c) const {
        switch (c) {
            case 0: return use_surface;
            case 1: return use_obstacle;
            case 2: return use_ground;
            default: return false;
        }
    }
};

/// Nearest-neighbor result in (azimuth, elevation) space.
struct AngularNeighbor {
    std::size_t point_index = 0;  // index into the source cloud
    double angular_distance = 0.0;
    double radius = 0.0;  // radial distance of the neighbor
};

/// Exact nearest-neighbor index over the (azimuth, elevation) angles of the
/// admitted cloud points. Azimuth wraps at +-pi; the metric is
/// sqrt(wrap(d_azimuth)^2 + d_elevation^2). Ties break toward the smallest
/// cloud point index, so queries are deterministic and order-independent.
class AngularIndex {
public:
    AngularIndex() = default;

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    /// Exact nearest admitted point, or nullopt for an empty index.
    std::optional<AngularNeighbor> nearest(double azimuth, double elevation) const;

private:
    friend AngularIndex build_index(const PointCloud&, const OcclusionParams&);

    struct Entry {
        double az, el, radius;
        std::size_t point_index;
    };
    struct Node {
        double split = 0.0;
        std::uint32_t entry = 0;     // entry at this node
        std::int32_t left = -1, right = -1;
        std::uint8_t axis = 0;  // 0 = azimuth, 1 = elevation
    };

    std::int32_t build_subtree(std::vector<std::uint32_t>& ids, std::size_t lo,
                               std::size_t hi, int depth);
    void search(std::int32_t node, double az, double el, double& best_d2,
                const Entry** best) const;

    std::vector<Entry> entries_;  // admitted points plus seam ghosts
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

/// Indexes points whose class is admitted by `params`. A cloud without
/// classes is taken as all-admitted. Seam handling duplicates each entry
/// once, shifted by 2*pi, so wrapped distances are exact.
AngularIndex build_index(const PointCloud& cloud, const OcclusionParams& params);

/// The per-point occlusion test: nearest neighbor in angle space, then the
/// relative radial condition (o_r - p_r) / p_r < rho. An empty index (or a
/// neighbor beyond the angular cutoff) never occludes.
bool point_occluded(const AngularIndex& index, const OcclusionParams& params,
                    const SphericalPoint& wheel_point);

/// Runs the per-point test on both contact-line endpoints of every
/// in-frustum sample; a sample is occluded when either endpoint is.
/// Out-of-frustum samples are never tested and keep occluded = false.
ProjectedTrajectory filter_occlusions(ProjectedTrajectory traj, const AngularIndex& index,
                                      const OcclusionParams& params);

}  // namespace trailmark
