#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>
#include <span>
#include <vector>

namespace trailmark {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Rigid body transform (rotation then translation): apply(p) = R*p + t.
struct RigidTransform {
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidTransform inverse() const {
        const Quat qi = rotation.conjugate();
        return {qi, -(qi * translation)};
    }
};

/// compose(a, b): applying the result equals applying b then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Timestamped vehicle pose, world <- body.
struct Pose {
    double timestamp = 0.0;
    Vec3 translation = Vec3::Zero();
    Quat rotation = Quat::Identity();

    RigidTransform transform() const { return {rotation, translation}; }
};

/// Pinhole camera. Camera frame: +z optical axis, +x right, +y down.
/// Pixel centers sit at integer coordinates; (cx, cy) is where the optical
/// axis lands. `extrinsic` maps body-frame points into the camera frame.
struct CameraModel {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    RigidTransform extrinsic;  // camera <- body
};

struct ImagePoint {
    double u = 0.0, v = 0.0;
};

/// Spherical coordinates around the camera origin:
///   azimuth   = atan2(x, z)                 in (-pi, pi]
///   elevation = atan2(-y, sqrt(x^2 + z^2))  in [-pi/2, pi/2], up positive
struct SphericalPoint {
    double azimuth = 0.0;
    double elevation = 0.0;
    double radius = 0.0;
};

/// Projects a camera-frame point. Returns nullopt when z <= 0 (behind the
/// camera); the caller drops such points.
std::optional<ImagePoint> project(const CameraModel& camera, const Vec3& point_camera);

/// Full projection chain for a world point: world -> body via the pose
/// inverse, body -> camera via the extrinsic, then the intrinsics and
/// homogeneous division.
std::optional<ImagePoint> project_world(const CameraModel& camera, const Pose& pose,
                                        const Vec3& point_world);

/// Throws DegeneratePointError for the origin.
SphericalPoint to_spherical(const Vec3& point_camera);
Vec3 to_cartesian(const SphericalPoint& s);

/// Shortest signed angular difference a - b, wrapped into (-pi, pi].
double wrap_angle(double a);

/// Linear interpolation of translation and slerp of rotation between the
/// bracketing poses. `poses` must be time-ordered. Throws OutOfRangeError
/// when t lies outside [first, last].
Pose interpolate_pose(std::span<const Pose> poses, double t);

}  // namespace trailmark
