#include "trailmark/trajectory.hpp"

#include <cmath>
#include <string>

#include "trailmark/errors.hpp"

namespace trailmark {

int ProjectionWindow::samples_per_wheel() const {
    return static_cast<int>(std::floor(horizon * rate + 1e-9)) + 1;
}

namespace {

WheelContactSample contacts_for(const Pose& pose, const RigidTransform& wheel_tf,
                                double width, WheelSide side) {
    const Vec3 half = Vec3(0.0, 0.5 * width, 0.0);
    const Vec3 a_base = wheel_tf.apply(half);
    const Vec3 b_base = wheel_tf.apply(-half);
    WheelContactSample out;
    out.timestamp = pose.timestamp;
    out.wheel = side;
    const RigidTransform world_from_base = pose.transform();
    // Inner endpoint = the one nearer the base-link centerline (smaller |y|).
    if (std::abs(a_base.y()) <= std::abs(b_base.y())) {
        out.inner_world = world_from_base.apply(a_base);
        out.outer_world = world_from_base.apply(b_base);
    } else {
        out.inner_world = world_from_base.apply(b_base);
        out.outer_world = world_from_base.apply(a_base);
    }
    return out;
}

}  // namespace

std::array<WheelContactSample, 2> wheel_contacts(const Pose& pose, const WheelGeometry& geom) {
    return {contacts_for(pose, geom.front_left, geom.wheel_width, WheelSide::FrontLeft),
            contacts_for(pose, geom.front_right, geom.wheel_width, WheelSide::FrontRight)};
}

ProjectedTrajectory project_trajectory(double frame_time, std::span<const Pose> poses,
                                       const WheelGeometry& geom, const CameraModel& camera,
                                       const ProjectionWindow& window) {
    const int n = window.samples_per_wheel();
    const double last_time = frame_time + (n - 1) / window.rate;
    if (poses.empty() || frame_time < poses.front().timestamp ||
        last_time > poses.back().timestamp + 1e-9) {
        throw InsufficientPosesError("pose log does not cover projection window [" +
                                     std::to_string(frame_time) + ", " +
                                     std::to_string(last_time) + "]");
    }

    const Pose frame_pose = interpolate_pose(poses, frame_time);
    const RigidTransform cam_from_world =
        compose(camera.extrinsic, frame_pose.transform().inverse());

    ProjectedTrajectory traj;
    traj.frame_timestamp = frame_time;
    traj.wheels[0].reserve(n);
    traj.wheels[1].reserve(n);

    for (int k = 0; k < n; ++k) {
        double s = frame_time + k / window.rate;
        if (s > poses.back().timestamp) s = poses.back().timestamp;  // guard last ulp
        const Pose pose_s = interpolate_pose(poses, s);
        const auto contacts = wheel_contacts(pose_s, geom);
        for (int w = 0; w < 2; ++w) {
            TrajectorySample sample;
            sample.contact = contacts[w];
            sample.inner_camera = cam_from_world.apply(contacts[w].inner_world);
            sample.outer_camera = cam_from_world.apply(contacts[w].outer_world);
            const auto inner = project(camera, sample.inner_camera);
            const auto outer = project(camera, sample.outer_camera);
            const auto in_bounds = [&](const ImagePoint& p) {
                return p.u >= 0.0 && p.u <= camera.width - 1 && p.v >= 0.0 &&
                       p.v <= camera.height - 1;
            };
            if (inner && outer) {
                sample.inner_image = *inner;
                sample.outer_image = *outer;
                sample.in_frustum = in_bounds(*inner) && in_bounds(*outer);
            }
            traj.wheels[w].push_back(sample);
        }
    }
    return traj;
}

}  // namespace trailmark
