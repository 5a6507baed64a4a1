#pragma once

#include <array>
#include <span>
#include <vector>

#include "trailmark/geometry.hpp"

namespace trailmark {

enum class WheelSide { FrontLeft = 0, FrontRight = 1 };

/// Static vehicle geometry: base-link -> wheel-contact-center transforms for
/// the two front wheels, plus the contact line length (= wheel width). The
/// contact line runs along the wheel frame's y axis, perpendicular to the
/// rolling direction.
struct WheelGeometry {
    RigidTransform front_left;
    RigidTransform front_right;
    double wheel_width = 0.3;

    const RigidTransform& wheel(WheelSide side) const {
        return side == WheelSide::FrontLeft ? front_left : front_right;
    }
};

struct WheelContactSample {
    double timestamp = 0.0;
    WheelSide wheel = WheelSide::FrontLeft;
    Vec3 inner_world = Vec3::Zero();  // endpoint nearer the vehicle centerline
    Vec3 outer_world = Vec3::Zero();
};

struct ProjectionWindow {
    double rate = 10.0;    // Hz
    double horizon = 4.0;  // seconds ahead of the frame

    int samples_per_wheel() const;
};

struct TrajectorySample {
    WheelContactSample contact;
    ImagePoint inner_image, outer_image;  // placeholders when !in_frustum
    Vec3 inner_camera = Vec3::Zero();     // camera frame at the frame timestamp
    Vec3 outer_camera = Vec3::Zero();
    bool in_frustum = false;  // both endpoints: positive depth and inside bounds
    bool occluded = false;    // filled by the occlusion stage
};

/// Future wheel track of one camera frame. Samples are per wheel, strictly
/// increasing in time, spaced 1/rate apart. The flat sample index used in
/// occlusion ground-truth files is wheel * samples_per_wheel + k.
struct ProjectedTrajectory {
    double frame_timestamp = 0.0;
    std::array<std::vector<TrajectorySample>, 2> wheels;

    std::size_t total_samples() const { return wheels[0].size() + wheels[1].size(); }
};

/// Contact-line endpoints of both front wheels in the world frame.
std::array<WheelContactSample, 2> wheel_contacts(const Pose& pose, const WheelGeometry& geom);

/// Projects the wheel track over [t, t + horizon] into the camera frame at
/// time t. Throws InsufficientPosesError when the pose log does not cover
/// the window. Occlusion flags are left false.
ProjectedTrajectory project_trajectory(double frame_time, std::span<const Pose> poses,
                                       const WheelGeometry& geom, const CameraModel& camera,
                                       const ProjectionWindow& window);

}  // namespace trailmark
