#include "trailmark/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trailmark {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

// The tree holds one ghost copy of every entry, shifted by 2*pi across the
// azimuth seam, so an unwrapped coordinate search over all copies yields the
// wrapped nearest neighbor. Ghosts keep the original point index; ties
// between distinct points break toward the smaller index.
AngularIndex build_index(const PointCloud& cloud, const OcclusionParams& params) {
    AngularIndex index;
    const bool classified = cloud.has_classes();
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (classified && !params.class_used(cloud.classes[i])) continue;
        const SphericalPoint s = to_spherical(cloud.points[i]);
        index.entries_.push_back({s.azimuth, s.elevation, s.radius, i});
        const double ghost_az = s.azimuth <= 0.0 ? s.azimuth + kTwoPi : s.azimuth - kTwoPi;
        index.entries_.push_back({ghost_az, s.elevation, s.radius, i});
    }
    if (index.entries_.empty()) return index;

    std::vector<std::uint32_t> ids(index.entries_.size());
    for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    index.nodes_.reserve(index.entries_.size());
    index.root_ = index.build_subtree(ids, 0, ids.size(), 0);
    return index;
}

std::int32_t AngularIndex::build_subtree(std::vector<std::uint32_t>& ids, std::size_t lo,
                                         std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const std::uint8_t axis = static_cast<std::uint8_t>(depth % 2);
    const std::size_t mid = lo + (hi - lo) / 2;
    const auto coord = [&](std::uint32_t id) {
        return axis == 0 ? entries_[id].az : entries_[id].el;
    };
    // Strict total order (coordinate, then entry id) keeps the selected
    // median, and therefore the whole tree, independent of input ordering.
    std::nth_element(ids.begin() + lo, ids.begin() + mid, ids.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ca = coord(a), cb = coord(b);
                         return ca < cb || (ca == cb && a < b);
                     });
    const std::uint32_t entry = ids[mid];
    Node node;
    node.axis = axis;
    node.split = coord(entry);
    node.entry = entry;
    const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    const std::int32_t left = build_subtree(ids, lo, mid, depth + 1);
    const std::int32_t right = build_subtree(ids, mid + 1, hi, depth + 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

void AngularIndex::search(std::int32_t node_id, double az, double el, double& best_d2,
                          const Entry** best) const {
    if (node_id < 0) return;
    const Node& node = nodes_[node_id];
    const Entry& e = entries_[node.entry];
    const double daz = az - e.az;
    const double del = el - e.el;
    const double d2 = daz * daz + del * del;
    if (d2 < best_d2 ||
        (d2 == best_d2 && (*best == nullptr || e.point_index < (*best)->point_index))) {
        best_d2 = d2;
        *best = &e;
    }
    const double q = node.axis == 0 ? az : el;
    const double delta = q - node.split;
    const std::int32_t near_side = delta < 0.0 ? node.left : node.right;
    const std::int32_t far_side = delta < 0.0 ? node.right : node.left;
    search(near_side, az, el, best_d2, best);
    // Equal axis distance may still hide an equidistant smaller-index point.
    if (delta * delta <= best_d2) search(far_side, az, el, best_d2, best);
}

std::optional<AngularNeighbor> AngularIndex::nearest(double azimuth, double elevation) const {
    if (entries_.empty()) return std::nullopt;
    double best_d2 = std::numeric_limits<double>::infinity();
    const Entry* best = nullptr;
    search(root_, azimuth, elevation, best_d2, &best);
    AngularNeighbor out;
    out.point_index = best->point_index;
    const double da = wrap_angle(azimuth - best->az);
    const double de = elevation - best->el;
    out.angular_distance = std::sqrt(da * da + de * de);
    out.radius = best->radius;
    return out;
}

bool point_occluded(const AngularIndex& index, const OcclusionParams& params,
                    const SphericalPoint& wheel_point) {
    const auto neighbor = index.nearest(wheel_point.azimuth, wheel_point.elevation);
    if (!neighbor) return false;
    if (params.max_angle > 0.0 && neighbor->angular_distance > params.max_angle) return false;
    return (neighbor->radius - wheel_point.radius) / wheel_point.radius < params.rho;
}

ProjectedTrajectory filter_occlusions(ProjectedTrajectory traj, const AngularIndex& index,
                                      const OcclusionParams& params) {
    for (auto& wheel : traj.wheels) {
        for (auto& sample : wheel) {
            if (!sample.in_frustum) continue;
            const SphericalPoint inner = to_spherical(sample.inner_camera);
            const SphericalPoint outer = to_spherical(sample.outer_camera);
            sample.occluded = point_occluded(index, params, inner) ||
                              point_occluded(index, params, outer);
        }
    }
    return traj;
}

}  // namespace trailmark
