#include "trailmark/geometry.hpp"

#include <cmath>
#include <string>

#include "trailmark/errors.hpp"

namespace trailmark {

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

std::optional<ImagePoint> project(const CameraModel& camera, const Vec3& p) {
    if (p.z() <= 0.0) return std::nullopt;
    return ImagePoint{camera.fx * p.x() / p.z() + camera.cx,
                      camera.fy * p.y() / p.z() + camera.cy};
}

std::optional<ImagePoint> project_world(const CameraModel& camera, const Pose& pose,
                                        const Vec3& point_world) {
    const RigidTransform cam_from_world = compose(camera.extrinsic, pose.transform().inverse());
    return project(camera, cam_from_world.apply(point_world));
}

SphericalPoint to_spherical(const Vec3& p) {
    const double r = p.norm();
    if (r == 0.0) throw DegeneratePointError("to_spherical: point at origin");
    SphericalPoint s;
    s.azimuth = std::atan2(p.x(), p.z());
    s.elevation = std::atan2(-p.y(), std::sqrt(p.x() * p.x() + p.z() * p.z()));
    s.radius = r;
    return s;
}

Vec3 to_cartesian(const SphericalPoint& s) {
    const double ce = std::cos(s.elevation);
    return Vec3{s.radius * ce * std::sin(s.azimuth),
                -s.radius * std::sin(s.elevation),
                s.radius * ce * std::cos(s.azimuth)};
}

double wrap_angle(double a) {
    const double two_pi = 6.283185307179586476925286766559;
    a = std::fmod(a, two_pi);
    if (a <= -3.14159265358979323846) a += two_pi;
    if (a > 3.14159265358979323846) a -= two_pi;
    return a;
}

Pose interpolate_pose(std::span<const Pose> poses, double t) {
    if (poses.empty()) throw OutOfRangeError("interpolate_pose: empty pose log");
    if (t < poses.front().timestamp || t > poses.back().timestamp) {
        throw OutOfRangeError("interpolate_pose: t=" + std::to_string(t) +
                              " outside pose log [" + std::to_string(poses.front().timestamp) +
                              ", " + std::to_string(poses.back().timestamp) + "]");
    }
    // First pose with timestamp >= t.
    std::size_t lo = 0, hi = poses.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (poses[mid].timestamp < t) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if (poses[lo].timestamp == t) return poses[lo];
    const Pose& a = poses[lo - 1];
    const Pose& b = poses[lo];
    const double w = (t - a.timestamp) / (b.timestamp - a.timestamp);
    Pose out;
    out.timestamp = t;
    out.translation = (1.0 - w) * a.translation + w * b.translation;
    out.rotation = a.rotation.slerp(w, b.rotation);
    return out;
}

}  // namespace trailmark
