#include "trailmark/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "trailmark/errors.hpp"
#include "trailmark/io.hpp"
#include "trailmark/rng.hpp"

namespace trailmark {

namespace {

const std::set<std::string> kKnownExtras = {"mask", "label", "risk", "recon"};

void check_image_dims(const std::string& manifest, int line, const std::string& what, int w,
                      int h, const CameraModel& camera) {
    if (w != camera.width || h != camera.height) {
        throw ParseError(manifest, line,
                         what + " is " + std::to_string(w) + "x" + std::to_string(h) +
                             " but the camera is " + std::to_string(camera.width) + "x" +
                             std::to_string(camera.height));
    }
}

}  // namespace

std::string resolve_path(const DatasetManifest& m, const std::string& rel) {
    const std::filesystem::path p(rel);
    if (p.is_absolute() || m.base_dir.empty()) return rel;
    return (std::filesystem::path(m.base_dir) / p).string();
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);

    DatasetManifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();

    std::string line;
    int line_no = 0;
    if (!std::getline(in, line) || line != "trailmark-manifest v1") {
        throw ParseError(path, 1, "expected header 'trailmark-manifest v1'");
    }
    line_no = 1;

    bool have_camera = false, have_poses = false, have_vehicle = false;
    std::vector<int> frame_lines;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        if (key == "name") {
            if (!(ss >> m.name)) throw ParseError(path, line_no, "name expects a value");
        } else if (key == "camera") {
            if (!(ss >> m.camera_path)) throw ParseError(path, line_no, "camera expects a path");
            have_camera = true;
        } else if (key == "poses") {
            if (!(ss >> m.poses_path)) throw ParseError(path, line_no, "poses expects a path");
            have_poses = true;
        } else if (key == "vehicle_mask") {
            if (!(ss >> m.vehicle_mask_path)) {
                throw ParseError(path, line_no, "vehicle_mask expects a path");
            }
            have_vehicle = true;
        } else if (key == "tolerance") {
            std::string tok;
            if (!(ss >> tok)) throw ParseError(path, line_no, "tolerance expects a value");
            char* end = nullptr;
            m.tolerance = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size() || !(m.tolerance >= 0.0)) {
                throw ParseError(path, line_no, "bad tolerance '" + tok + "'");
            }
        } else if (key == "frame") {
            FrameRecord f;
            std::string ts_tok;
            if (!(ss >> f.id >> ts_tok >> f.image_path >> f.cloud_path)) {
                throw ParseError(path, line_no,
                                 "frame expects: id timestamp image_path cloud_path");
            }
            char* end = nullptr;
            f.timestamp = std::strtod(ts_tok.c_str(), &end);
            if (end != ts_tok.c_str() + ts_tok.size()) {
                throw ParseError(path, line_no, "bad frame timestamp '" + ts_tok + "'");
            }
            std::string extra;
            while (ss >> extra) {
                const std::size_t eq = extra.find('=');
                if (eq == std::string::npos || eq == 0 || eq + 1 >= extra.size()) {
                    throw ParseError(path, line_no, "bad frame extra '" + extra + "'");
                }
                const std::string ekey = extra.substr(0, eq);
                if (!kKnownExtras.count(ekey)) {
                    throw ParseError(path, line_no, "unknown frame extra '" + ekey + "'");
                }
                f.extras[ekey] = extra.substr(eq + 1);
            }
            m.frames.push_back(std::move(f));
            frame_lines.push_back(line_no);
        } else {
            throw ParseError(path, line_no, "unknown key '" + key + "'");
        }
    }
    if (!have_camera) throw ParseError(path, line_no, "missing camera reference");
    if (!have_poses) throw ParseError(path, line_no, "missing poses reference");
    if (!have_vehicle) throw ParseError(path, line_no, "missing vehicle_mask reference");

    // Id uniqueness and timestamp ordering.
    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
        if (!ids.insert(m.frames[i].id).second) {
            throw OrderViolationError(path + ":" + std::to_string(frame_lines[i]) +
                                      ": duplicate frame id '" + m.frames[i].id + "'");
        }
        if (i > 0 && m.frames[i].timestamp < m.frames[i - 1].timestamp) {
            throw OrderViolationError(path + ":" + std::to_string(frame_lines[i]) +
                                      ": frame timestamps must be non-decreasing");
        }
    }

    // Every referenced artifact must exist and parse.
    const CameraModel camera = load_camera(resolve_path(m, m.camera_path));
    load_poses(resolve_path(m, m.poses_path));
    {
        const BinaryMask vm = load_mask(resolve_path(m, m.vehicle_mask_path));
        check_image_dims(path, 1, "vehicle mask", vm.width, vm.height, camera);
    }
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
        const FrameRecord& f = m.frames[i];
        const ImageTensor image = load_image(resolve_path(m, f.image_path));
        check_image_dims(path, frame_lines[i], "frame " + f.id + " image", image.width,
                         image.height, camera);
        load_cloud(resolve_path(m, f.cloud_path));
        for (const auto& [ekey, epath] : f.extras) {
            const std::string full = resolve_path(m, epath);
            if (ekey == "mask") {
                const BinaryMask mk = load_mask(full);
                check_image_dims(path, frame_lines[i], "frame " + f.id + " mask", mk.width,
                                 mk.height, camera);
            } else if (ekey == "label") {
                const SemanticLabelMap lm = load_label_map(full);
                check_image_dims(path, frame_lines[i], "frame " + f.id + " label map", lm.width,
                                 lm.height, camera);
            } else {  // risk, recon: 8-bit images of any pipeline-stage size
                load_image(full);
            }
        }
    }
    return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "trailmark-manifest v1\n";
    out << "name " << m.name << "\n";
    out << "camera " << m.camera_path << "\n";
    out << "poses " << m.poses_path << "\n";
    out << "vehicle_mask " << m.vehicle_mask_path << "\n";
    out << "tolerance " << fmt_double(m.tolerance) << "\n";
    for (const FrameRecord& f : m.frames) {
        out << "frame " << f.id << " " << fmt_double(f.timestamp) << " " << f.image_path << " "
            << f.cloud_path;
        for (const auto& [key, value] : f.extras) out << " " << key << "=" << value;
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

std::pair<DatasetManifest, DatasetManifest> split_manifest(const DatasetManifest& m,
                                                           double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw DimensionMismatchError("split fraction must be in (0, 1)");
    }
    std::vector<std::size_t> order(m.frames.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t train_count = static_cast<std::size_t>(
        std::floor(static_cast<double>(order.size()) * fraction));

    std::vector<bool> in_train(m.frames.size(), false);
    for (std::size_t i = 0; i < train_count; ++i) in_train[order[i]] = true;

    DatasetManifest train = m, val = m;
    train.frames.clear();
    val.frames.clear();
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
        (in_train[i] ? train : val).frames.push_back(m.frames[i]);
    }
    return {std::move(train), std::move(val)};
}

}  // namespace trailmark
