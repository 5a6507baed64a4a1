#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trailmark/geometry.hpp"
#include "trailmark/image.hpp"
#include "trailmark/occlusion.hpp"
#include "trailmark/trajectory.hpp"

namespace trailmark {

/// Seeded value-noise texture: octave sum over a hashed integer lattice.
struct NoiseParams {
    double scale = 2.0;     // lattice cells per meter
    int octaves = 3;
    double contrast = 0.3;  // modulation amplitude around the base color
    Vec3 base = Vec3(0.5, 0.4, 0.3);
};

struct BoxObstacle {
    Vec3 center;  // world frame
    Vec3 size;    // full extents
};

struct SphereObstacle {
    Vec3 center;
    double radius = 1.0;
};

enum class PathType { Line, Arc };

/// Constant-speed path on the ground plane; Arc turns at a constant rate.
struct VehiclePath {
    PathType type = PathType::Line;
    double start_x = 0.0, start_y = 0.0;
    double heading = 0.0;  // initial yaw, radians
    double speed = 8.33;   // m/s
    double duration = 10.0;
    double turn_rate = 0.0;  // rad/s, Arc only
};

struct CloudPattern {
    int azimuth_steps = 360;
    double elevation_min = -0.6;
    double elevation_max = 0.2;
    int elevation_steps = 32;
    double range_noise = 0.0;  // Gaussian sigma, meters
    double max_range = 80.0;
};

struct SceneSpec {
    std::string name = "scene";
    std::uint64_t seed = 0;
    double ground_height = 0.0;
    NoiseParams ground_texture;
    NoiseParams obstacle_texture{8.0, 5, 0.8, Vec3(0.2, 0.5, 0.2)};
    std::vector<BoxObstacle> boxes;
    std::vector<SphereObstacle> spheres;
    VehiclePath path;
    CloudPattern cloud;
    double pose_rate = 50.0;  // pose log sampling rate, Hz
};

/// Versioned text format (`trailmark-scene v1`); bad fields raise
/// ConfigError with the offending line.
SceneSpec load_scene(const std::string& path);

/// Vehicle pose (world <- body) on the path at time t.
Pose path_pose(const SceneSpec& scene, double t);

RigidTransform world_from_camera(const Pose& pose, const CameraModel& camera);

/// First intersection along a unit-direction ray. material: -1 = none,
/// 0 = ground plane, 1+i = box i, 1+boxes+j = sphere j.
struct RayHit {
    double t = 0.0;
    Vec3 point = Vec3::Zero();
    int material = -1;
};

RayHit cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& dir);

/// Per-pixel ray cast through integer pixel centers. Image values are
/// quantized to the 8-bit grid so files round-trip exactly. Labels: 0 =
/// unlabeled (sky), 1 = ground, 2 = obstacle (the vegetation stand-in).
void render(const SceneSpec& scene, const Pose& pose, const CameraModel& camera,
            ImageTensor& image, SemanticLabelMap& labels);

/// Spinning-scanner pattern: elevation rings by azimuth steps, rays from the
/// camera center, points returned in the camera frame with classes
/// (ground plane -> Ground, obstacles -> Obstacle). Optional seeded Gaussian
/// range noise.
PointCloud sample_cloud(const SceneSpec& scene, const Pose& pose, const CameraModel& camera,
                        std::uint64_t noise_seed);

/// Exact geometric test: a point is occluded iff the open segment from the
/// camera center to it intersects any obstacle or the ground strictly
/// before the point.
std::vector<std::uint8_t> oracle_occlusion(const SceneSpec& scene,
                                           const RigidTransform& world_from_cam,
                                           const std::vector<Vec3>& points_world);

/// Line-delimited `frame sample_index occluded`; sample_index is
/// wheel * samples_per_wheel + step.
struct OcclusionRecord {
    int frame = 0;
    int sample_index = 0;
    std::uint8_t occluded = 0;
};

void save_occlusion_flags(const std::string& path, const std::vector<OcclusionRecord>& records);
std::vector<OcclusionRecord> load_occlusion_flags(const std::string& path);

/// Writes a complete ingestible dataset under out_dir (images, clouds,
/// semantic labels, pose log, camera file, vehicle mask, ground-truth
/// occlusion flags, manifest); emits one frame per window-rate step whose
/// projection window fits inside the path duration. Returns the manifest
/// path.
std::string generate_dataset(const SceneSpec& scene, const CameraModel& camera,
                             const WheelGeometry& geom, const ProjectionWindow& window,
                             const std::string& out_dir);

}  // namespace trailmark
