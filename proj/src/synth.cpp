#include "trailmark/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "trailmark/dataset.hpp"
#include "trailmark/errors.hpp"
#include "trailmark/io.hpp"
#include "trailmark/rng.hpp"

namespace trailmark {

namespace {

constexpr std::uint64_t kGroundSalt = 0x47524f554e44ull;
constexpr std::uint64_t kObstacleSalt = 0x4f4253544143ull;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
    const std::uint64_t h = seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(ix) +
                            0xc2b2ae3d27d4eb4full * static_cast<std::uint64_t>(iy);
    return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const std::int64_t ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    double tx = x - fx, ty = y - fy;
    tx = tx * tx * (3.0 - 2.0 * tx);  // smoothstep keeps the field C1
    ty = ty * ty * (3.0 - 2.0 * ty);
    const double v00 = lattice_value(seed, ix, iy);
    const double v10 = lattice_value(seed, ix + 1, iy);
    const double v01 = lattice_value(seed, ix, iy + 1);
    const double v11 = lattice_value(seed, ix + 1, iy + 1);
    return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

double fbm(std::uint64_t seed, int octaves, double x, double y) {
    double sum = 0.0, amp = 1.0, norm = 0.0, freq = 1.0;
    for (int o = 0; o < octaves; ++o) {
        sum += amp * value_noise(seed + static_cast<std::uint64_t>(o) * 0x632be59bd9b4e019ull,
                                 x * freq, y * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    return sum / norm;
}

// Obstacles fold height into the texture coordinates so vertical faces
// still vary; the ground uses plain world (x, y).
Vec3 texture_color(const NoiseParams& np, std::uint64_t salt, const Vec3& p, bool use_height) {
    const double u = (p.x() + (use_height ? p.z() : 0.0)) * np.scale;
    const double v = (p.y() + (use_height ? 0.7 * p.z() : 0.0)) * np.scale;
    const double n = fbm(salt, np.octaves, u, v);
    Vec3 c = np.base + Vec3::Constant(np.contrast * (n - 0.5));
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

double parse_num(const std::string& tok, const std::string& path, int line, const char* field) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (tok.empty() || end != begin + tok.size() || !std::isfinite(v)) {
        throw ConfigError(path, line, std::string("bad ") + field + ": '" + tok + "'");
    }
    return v;
}

NoiseParams parse_texture(std::istringstream& ss, const std::string& path, int line,
                          const char* field) {
    std::string t[6];
    for (auto& tok : t) {
        if (!(ss >> tok)) {
            throw ConfigError(path, line,
                              std::string(field) + " expects: scale octaves contrast r g b");
        }
    }
    NoiseParams np;
    np.scale = parse_num(t[0], path, line, field);
    np.octaves = static_cast<int>(parse_num(t[1], path, line, field));
    np.contrast = parse_num(t[2], path, line, field);
    np.base = Vec3(parse_num(t[3], path, line, field), parse_num(t[4], path, line, field),
                   parse_num(t[5], path, line, field));
    if (np.scale <= 0 || np.octaves < 1 || np.contrast < 0) {
        throw ConfigError(path, line, std::string(field) + ": scale > 0, octaves >= 1, "
                                      "contrast >= 0 required");
    }
    return np;
}

}  // namespace

SceneSpec load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open scene file");
    std::string line;
    if (!std::getline(in, line) || line != "trailmark-scene v1") {
        throw ConfigError(path, 1, "expected header 'trailmark-scene v1'");
    }
    SceneSpec scene;
    bool have_path = false;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        auto num = [&](const char* field) {
            std::string tok;
            if (!(ss >> tok)) throw ConfigError(path, line_no, std::string(field) + " expects a value");
            return parse_num(tok, path, line_no, field);
        };
        if (key == "name") {
            if (!(ss >> scene.name)) throw ConfigError(path, line_no, "name expects a value");
        } else if (key == "seed") {
            scene.seed = static_cast<std::uint64_t>(num("seed"));
        } else if (key == "ground_height") {
            scene.ground_height = num("ground_height");
        } else if (key == "ground_texture") {
            scene.ground_texture = parse_texture(ss, path, line_no, "ground_texture");
        } else if (key == "obstacle_texture") {
            scene.obstacle_texture = parse_texture(ss, path, line_no, "obstacle_texture");
        } else if (key == "box") {
            // One value per statement: argument evaluation order is
            // unspecified, so Vec3(num(), num(), num()) would scramble the
            // fields.
            BoxObstacle b;
            b.center.x() = num("box cx");
            b.center.y() = num("box cy");
            b.center.z() = num("box cz");
            b.size.x() = num("box sx");
            b.size.y() = num("box sy");
            b.size.z() = num("box sz");
            if (b.size.minCoeff() <= 0) throw ConfigError(path, line_no, "box sizes must be positive");
            scene.boxes.push_back(b);
        } else if (key == "sphere") {
            SphereObstacle s;
            s.center.x() = num("sphere cx");
            s.center.y() = num("sphere cy");
            s.center.z() = num("sphere cz");
            s.radius = num("sphere radius");
            if (s.radius <= 0) throw ConfigError(path, line_no, "sphere radius must be positive");
            scene.spheres.push_back(s);
        } else if (key == "path") {
            std::string type;
            if (!(ss >> type)) throw ConfigError(path, line_no, "path expects a type (line|arc)");
            if (type == "line") {
                scene.path.type = PathType::Line;
            } else if (type == "arc") {
                scene.path.type = PathType::Arc;
            } else {
                throw ConfigError(path, line_no, "path type must be line or arc, got '" + type + "'");
            }
            scene.path.start_x = num("path start_x");
            scene.path.start_y = num("path start_y");
            scene.path.heading = num("path heading");
            scene.path.speed = num("path speed");
            scene.path.duration = num("path duration");
            if (scene.path.type == PathType::Arc) scene.path.turn_rate = num("path turn_rate");
            have_path = true;
        } else if (key == "cloud") {
            scene.cloud.azimuth_steps = static_cast<int>(num("cloud azimuth_steps"));
            scene.cloud.elevation_min = num("cloud elevation_min");
            scene.cloud.elevation_max = num("cloud elevation_max");
            scene.cloud.elevation_steps = static_cast<int>(num("cloud elevation_steps"));
            scene.cloud.range_noise = num("cloud range_noise");
            scene.cloud.max_range = num("cloud max_range");
        } else if (key == "pose_rate") {
            scene.pose_rate = num("pose_rate");
        } else {
            throw ConfigError(path, line_no, "unknown key '" + key + "'");
        }
    }
    if (!have_path) throw ConfigError(path, line_no, "missing path declaration");
    if (scene.path.speed <= 0) throw ConfigError(path, line_no, "path speed must be positive");
    if (scene.path.duration <= 0) throw ConfigError(path, line_no, "path duration must be positive");
    if (scene.path.type == PathType::Arc && scene.path.turn_rate == 0) {
        throw ConfigError(path, line_no, "arc path needs a nonzero turn_rate");
    }
    if (scene.cloud.azimuth_steps < 1 || scene.cloud.elevation_steps < 1) {
        throw ConfigError(path, line_no, "cloud step counts must be >= 1");
    }
    if (scene.cloud.elevation_min > scene.cloud.elevation_max) {
        throw ConfigError(path, line_no, "cloud elevation_min must be <= elevation_max");
    }
    if (scene.cloud.range_noise < 0) throw ConfigError(path, line_no, "cloud range_noise must be >= 0");
    if (scene.cloud.max_range <= 0) throw ConfigError(path, line_no, "cloud max_range must be positive");
    if (scene.pose_rate <= 0) throw ConfigError(path, line_no, "pose_rate must be positive");
    for (const BoxObstacle& b : scene.boxes) {
        if (b.center.z() - b.size.z() / 2 < scene.ground_height - 1e-9) {
            throw ConfigError(path, line_no, "box must sit on or above the ground plane");
        }
    }
    for (const SphereObstacle& s : scene.spheres) {
        if (s.center.z() - s.radius < scene.ground_height - 1e-9) {
            throw ConfigError(path, line_no, "sphere must sit on or above the ground plane");
        }
    }
    return scene;
}

Pose path_pose(const SceneSpec& scene, double t) {
    const VehiclePath& p = scene.path;
    double x, y, heading;
    if (p.type == PathType::Line || p.turn_rate == 0.0) {
        heading = p.heading;
        x = p.start_x + p.speed * t * std::cos(p.heading);
        y = p.start_y + p.speed * t * std::sin(p.heading);
    } else {
        heading = p.heading + p.turn_rate * t;
        const double radius = p.speed / p.turn_rate;
        x = p.start_x + radius * (std::sin(heading) - std::sin(p.heading));
        y = p.start_y - radius * (std::cos(heading) - std::cos(p.heading));
    }
    Pose pose;
    pose.timestamp = t;
    pose.translation = Vec3(x, y, scene.ground_height);
    pose.rotation = Quat(Eigen::AngleAxisd(heading, Vec3::UnitZ()));
    return pose;
}

RigidTransform world_from_camera(const Pose& pose, const CameraModel& camera) {
    return compose(pose.transform(), camera.extrinsic.inverse());
}

RayHit cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& dir) {
    constexpr double kEps = 1e-9;
    RayHit best;
    best.t = std::numeric_limits<double>::infinity();

    if (dir.z() != 0.0) {
        const double t = (scene.ground_height - origin.z()) / dir.z();
        if (t > kEps && t < best.t) {
            best.t = t;
            best.material = 0;
        }
    }
    for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
        const BoxObstacle& b = scene.boxes[i];
        double t0 = -std::numeric_limits<double>::infinity();
        double t1 = std::numeric_limits<double>::infinity();
        bool miss = false;
        for (int a = 0; a < 3 && !miss; ++a) {
            const double lo = b.center[a] - b.size[a] / 2;
            const double hi = b.center[a] + b.size[a] / 2;
            if (dir[a] == 0.0) {
                if (origin[a] < lo || origin[a] > hi) miss = true;
            } else {
                double ta = (lo - origin[a]) / dir[a];
                double tb = (hi - origin[a]) / dir[a];
                if (ta > tb) std::swap(ta, tb);
                t0 = std::max(t0, ta);
                t1 = std::min(t1, tb);
            }
        }
        if (miss || t0 > t1) continue;
        const double th = t0 > kEps ? t0 : (t1 > kEps ? t1 : -1.0);
        if (th > 0 && th < best.t) {
            best.t = th;
            best.material = 1 + static_cast<int>(i);
        }
    }
    for (std::size_t j = 0; j < scene.spheres.size(); ++j) {
        const SphereObstacle& s = scene.spheres[j];
        const Vec3 oc = origin - s.center;
        const double b = oc.dot(dir);
        const double disc = b * b - (oc.squaredNorm() - s.radius * s.radius);
        if (disc < 0) continue;
        const double sq = std::sqrt(disc);
        const double t0 = -b - sq, t1 = -b + sq;
        const double th = t0 > kEps ? t0 : (t1 > kEps ? t1 : -1.0);
        if (th > 0 && th < best.t) {
            best.t = th;
            best.material = 1 + static_cast<int>(scene.boxes.size() + j);
        }
    }
    if (best.material < 0) {
        best.t = 0.0;
        return best;
    }
    best.point = origin + best.t * dir;
    return best;
}

void render(const SceneSpec& scene, const Pose& pose, const CameraModel& camera,
            ImageTensor& image, SemanticLabelMap& labels) {
    image = ImageTensor(camera.width, camera.height, 3);
    labels = SemanticLabelMap(camera.width, camera.height, 0);
    const RigidTransform wc = world_from_camera(pose, camera);
    const Vec3 sky(0.70, 0.80, 0.90);
    for (int v = 0; v < camera.height; ++v) {
        for (int u = 0; u < camera.width; ++u) {
            Vec3 dir_cam((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
            dir_cam.normalize();
            const Vec3 dir_world = wc.rotation * dir_cam;
            const RayHit hit = cast_ray(scene, wc.translation, dir_world);
            Vec3 color;
            if (hit.material < 0) {
                color = sky;
            } else if (hit.material == 0) {
                color = texture_color(scene.ground_texture, scene.seed ^ kGroundSalt, hit.point,
                                      false);
                labels.at(u, v) = 1;
            } else {
                color = texture_color(scene.obstacle_texture, scene.seed ^ kObstacleSalt,
                                      hit.point, true);
                labels.at(u, v) = 2;
            }
            for (int c = 0; c < 3; ++c) image.at(u, v, c) = color[c];
        }
    }
    quantize_to_8bit(image);
}

PointCloud sample_cloud(const SceneSpec& scene, const Pose& pose, const CameraModel& camera,
                        std::uint64_t noise_seed) {
    const CloudPattern& cp = scene.cloud;
    const RigidTransform wc = world_from_camera(pose, camera);
    Rng rng(noise_seed);
    PointCloud cloud;
    constexpr double kPi = 3.14159265358979323846;
    for (int e = 0; e < cp.elevation_steps; ++e) {
        const double el =
            cp.elevation_steps == 1
                ? cp.elevation_min
                : cp.elevation_min + (cp.elevation_max - cp.elevation_min) * e /
                                         (cp.elevation_steps - 1);
        for (int a = 0; a < cp.azimuth_steps; ++a) {
            const double az = -kPi + 2.0 * kPi * a / cp.azimuth_steps;
            const Vec3 dir_cam = to_cartesian(SphericalPoint{az, el, 1.0});
            const Vec3 dir_world = wc.rotation * dir_cam;
            const RayHit hit = cast_ray(scene, wc.translation, dir_world);
            if (hit.material < 0 || hit.t > cp.max_range) continue;
            double r = hit.t;
            if (cp.range_noise > 0.0) {
                r += cp.range_noise * rng.gaussian();
                r = std::max(r, 1e-6);
            }
            cloud.points.push_back(dir_cam * r);
            cloud.classes.push_back(static_cast<std::uint8_t>(
                hit.material == 0 ? PointClass::Ground : PointClass::Obstacle));
        }
    }
    return cloud;
}

std::vector<std::uint8_t> oracle_occlusion(const SceneSpec& scene,
                                           const RigidTransform& world_from_cam,
                                           const std::vector<Vec3>& points_world) {
    std::vector<std::uint8_t> flags(points_world.size(), 0);
    const Vec3 origin = world_from_cam.translation;
    for (std::size_t i = 0; i < points_world.size(); ++i) {
        const Vec3 seg = points_world[i] - origin;
        const double len = seg.norm();
        if (len <= 0.0) continue;
        const RayHit hit = cast_ray(scene, origin, seg / len);
        flags[i] = hit.material >= 0 && hit.t < len * (1.0 - 1e-9) ? 1 : 0;
    }
    return flags;
}

void save_occlusion_flags(const std::string& path, const std::vector<OcclusionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const OcclusionRecord& r : records) {
        out << r.frame << " " << r.sample_index << " " << static_cast<int>(r.occluded) << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<OcclusionRecord> load_occlusion_flags(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);
    std::vector<OcclusionRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        OcclusionRecord r;
        int occ = 0;
        if (!(ss >> r.frame >> r.sample_index >> occ) || (occ != 0 && occ != 1)) {
            throw ParseError(path, line_no, "expected: frame sample_index occluded(0|1)");
        }
        r.occluded = static_cast<std::uint8_t>(occ);
        records.push_back(r);
    }
    return records;
}

std::string generate_dataset(const SceneSpec& scene, const CameraModel& camera,
                             const WheelGeometry& geom, const ProjectionWindow& window,
                             const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (scene.path.duration + 1e-9 < window.horizon) {
        throw PathTooShortError("path duration " + fmt_double(scene.path.duration) +
                                " s is shorter than the projection horizon " +
                                fmt_double(window.horizon) + " s");
    }

    std::vector<double> frame_times;
    for (int k = 0;; ++k) {
        const double t = k / window.rate;
        if (t + window.horizon > scene.path.duration + 1e-9) break;
        frame_times.push_back(t);
    }

    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "clouds");
    fs::create_directories(fs::path(out_dir) / "labels");

    // Pose log: uniform grid merged with the exact frame times, so frame
    // poses interpolate to the very samples used for rendering.
    std::vector<double> pose_times;
    const int n_poses = static_cast<int>(std::floor(scene.path.duration * scene.pose_rate + 1e-9));
    for (int k = 0; k <= n_poses; ++k) pose_times.push_back(k / scene.pose_rate);
    if (pose_times.back() < scene.path.duration - 1e-12) {
        pose_times.push_back(scene.path.duration);
    }
    pose_times.insert(pose_times.end(), frame_times.begin(), frame_times.end());
    std::sort(pose_times.begin(), pose_times.end());
    pose_times.erase(std::unique(pose_times.begin(), pose_times.end(),
                                 [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                     pose_times.end());
    std::vector<Pose> log;
    log.reserve(pose_times.size());
    for (const double t : pose_times) log.push_back(path_pose(scene, t));
    save_poses((fs::path(out_dir) / "poses.txt").string(), log);

    save_camera((fs::path(out_dir) / "camera.txt").string(), camera);

    // Static hood mask: bottom strip of the image.
    BinaryMask vehicle(camera.width, camera.height);
    const int hood_top = camera.height - std::max(1, camera.height / 12);
    for (int y = hood_top; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) vehicle.at(x, y) = 1;
    }
    save_mask((fs::path(out_dir) / "vehicle_mask.pgm").string(), vehicle);

    DatasetManifest manifest;
    manifest.name = scene.name;
    manifest.camera_path = "camera.txt";
    manifest.poses_path = "poses.txt";
    manifest.vehicle_mask_path = "vehicle_mask.pgm";
    manifest.tolerance = 0.05;
    manifest.base_dir = out_dir;

    std::vector<OcclusionRecord> gt;
    for (std::size_t k = 0; k < frame_times.size(); ++k) {
        char idbuf[24];
        std::snprintf(idbuf, sizeof idbuf, "%06zu", k);
        const std::string id = idbuf;
        const double t = frame_times[k];
        const Pose pose = path_pose(scene, t);

        ImageTensor image;
        SemanticLabelMap labels;
        render(scene, pose, camera, image, labels);
        const std::string image_rel = "images/frame_" + id + ".ppm";
        const std::string label_rel = "labels/frame_" + id + ".pgm";
        save_image((fs::path(out_dir) / image_rel).string(), image);
        save_label_map((fs::path(out_dir) / label_rel).string(), labels);

        const PointCloud cloud = sample_cloud(scene, pose, camera, scene.seed ^ mix64(k + 1));
        const std::string cloud_rel = "clouds/frame_" + id + ".ply";
        save_cloud((fs::path(out_dir) / cloud_rel).string(), cloud);

        // Ground-truth occlusion over the same trajectory the pipeline
        // projects (built from the written pose log).
        const ProjectedTrajectory traj = project_trajectory(t, log, geom, camera, window);
        const RigidTransform wc = world_from_camera(pose, camera);
        std::vector<Vec3> endpoints;
        for (const auto& wheel : traj.wheels) {
            for (const TrajectorySample& s : wheel) {
                endpoints.push_back(s.contact.inner_world);
                endpoints.push_back(s.contact.outer_world);
            }
        }
        const std::vector<std::uint8_t> flags = oracle_occlusion(scene, wc, endpoints);
        const int spw = window.samples_per_wheel();
        for (int wheel = 0; wheel < 2; ++wheel) {
            for (int s = 0; s < spw; ++s) {
                const std::size_t base = (static_cast<std::size_t>(wheel) * spw + s) * 2;
                OcclusionRecord rec;
                rec.frame = static_cast<int>(k);
                rec.sample_index = wheel * spw + s;
                rec.occluded = flags[base] || flags[base + 1] ? 1 : 0;
                gt.push_back(rec);
            }
        }

        FrameRecord f;
        f.id = id;
        f.timestamp = t;
        f.image_path = image_rel;
        f.cloud_path = cloud_rel;
        f.extras["label"] = label_rel;
        manifest.frames.push_back(std::move(f));
    }

    save_occlusion_flags((fs::path(out_dir) / "gt_occlusion.txt").string(), gt);
    const std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
    save_manifest(manifest_path, manifest);
    return manifest_path;
}

}  // namespace trailmark
