#include "trailmark/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "trailmark/errors.hpp"

namespace trailmark {

namespace {

double parse_num(const std::string& tok, const std::string& path, int line, const std::string& key) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (tok.empty() || end != begin + tok.size() || !std::isfinite(v)) {
        throw ConfigError(path, line, key + ": bad number '" + tok + "'");
    }
    return v;
}

int parse_int(const std::string& tok, const std::string& path, int line, const std::string& key) {
    const double v = parse_num(tok, path, line, key);
    if (v != std::floor(v)) throw ConfigError(path, line, key + ": expected an integer");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& tok, const std::string& path, int line, const std::string& key) {
    if (tok == "1" || tok == "true") return true;
    if (tok == "0" || tok == "false") return false;
    throw ConfigError(path, line, key + ": expected 0/1/true/false, got '" + tok + "'");
}

class LineParser {
public:
    LineParser(std::istringstream& ss, const std::string& path, int line, const std::string& key)
        : ss_(ss), path_(path), line_(line), key_(key) {}

    std::string token() {
        std::string t;
        if (!(ss_ >> t)) throw ConfigError(path_, line_, key_ + ": missing value");
        return t;
    }
    double num() { return parse_num(token(), path_, line_, key_); }
    int integer() { return parse_int(token(), path_, line_, key_); }
    bool boolean() { return parse_bool(token(), path_, line_, key_); }
    Vec3 vec3() {
        const double x = num(), y = num(), z = num();
        return Vec3(x, y, z);
    }
    Quat quat() {
        const double qx = num(), qy = num(), qz = num(), qw = num();
        Quat q(qw, qx, qy, qz);
        if (std::abs(q.norm() - 1.0) > 1e-6) {
            throw ConfigError(path_, line_, key_ + ": quaternion must have unit norm");
        }
        q.normalize();
        return q;
    }
    void done() {
        std::string extra;
        if (ss_ >> extra) throw ConfigError(path_, line_, key_ + ": unexpected trailing '" + extra + "'");
    }

private:
    std::istringstream& ss_;
    const std::string& path_;
    int line_;
    const std::string& key_;
};

void parse_classes(const std::string& tok, OcclusionParams& oc, const std::string& path, int line) {
    oc.use_surface = oc.use_obstacle = oc.use_ground = false;
    std::istringstream ss(tok);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name == "surface") {
            oc.use_surface = true;
        } else if (name == "obstacle") {
            oc.use_obstacle = true;
        } else if (name == "ground") {
            oc.use_ground = true;
        } else {
            throw ConfigError(path, line, "occlusion_classes: unknown class '" + name + "'");
        }
    }
    if (!oc.use_surface && !oc.use_obstacle && !oc.use_ground) {
        throw ConfigError(path, line, "occlusion_classes: at least one class required");
    }
}

}  // namespace

RigidTransform default_camera_extrinsic() {
    Eigen::Matrix3d r;
    // Rows are the camera axes expressed in the body frame.
    r << 0, -1, 0,  //
        0, 0, -1,   //
        1, 0, 0;
    RigidTransform t;
    t.rotation = Quat(r);
    t.translation = Vec3(0.0, 1.4, 0.0);  // body-origin camera raised 1.4 m
    return t;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    std::string line;
    if (!std::getline(in, line) || line != "trailmark-config v1") {
        throw ConfigError(path, 1, "expected header 'trailmark-config v1'");
    }

    RunConfig c;
    c.camera.width = 640;
    c.camera.height = 480;
    c.camera.fx = 320.0;
    c.camera.fy = 320.0;
    c.camera.cx = 319.5;
    c.camera.cy = 239.5;
    c.camera.extrinsic = default_camera_extrinsic();
    c.wheels.front_left.translation = Vec3(1.2, 0.6, 0.0);
    c.wheels.front_right.translation = Vec3(1.2, -0.6, 0.0);

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        LineParser p(ss, path, line_no, key);
        if (key == "camera_fx") {
            c.camera.fx = p.num();
        } else if (key == "camera_fy") {
            c.camera.fy = p.num();
        } else if (key == "camera_cx") {
            c.camera.cx = p.num();
        } else if (key == "camera_cy") {
            c.camera.cy = p.num();
        } else if (key == "camera_width") {
            c.camera.width = p.integer();
        } else if (key == "camera_height") {
            c.camera.height = p.integer();
        } else if (key == "camera_extrinsic_translation") {
            c.camera.extrinsic.translation = p.vec3();
        } else if (key == "camera_extrinsic_rotation") {
            c.camera.extrinsic.rotation = p.quat();
        } else if (key == "wheel_left_translation") {
            c.wheels.front_left.translation = p.vec3();
        } else if (key == "wheel_left_rotation") {
            c.wheels.front_left.rotation = p.quat();
        } else if (key == "wheel_right_translation") {
            c.wheels.front_right.translation = p.vec3();
        } else if (key == "wheel_right_rotation") {
            c.wheels.front_right.rotation = p.quat();
        } else if (key == "wheel_width") {
            c.wheels.wheel_width = p.num();
            if (c.wheels.wheel_width <= 0) {
                throw ConfigError(path, line_no, "wheel_width must be positive");
            }
        } else if (key == "window_rate") {
            c.window.rate = p.num();
            if (c.window.rate <= 0) throw ConfigError(path, line_no, "window_rate must be positive");
        } else if (key == "window_horizon") {
            c.window.horizon = p.num();
            if (c.window.horizon <= 0) {
                throw ConfigError(path, line_no, "window_horizon must be positive");
            }
        } else if (key == "occlusion_rho") {
            c.occlusion.rho = p.num();
            if (c.occlusion.rho <= 0) throw ConfigError(path, line_no, "occlusion_rho must be positive");
        } else if (key == "occlusion_classes") {
            parse_classes(p.token(), c.occlusion, path, line_no);
        } else if (key == "occlusion_max_angle") {
            c.occlusion.max_angle = p.num();
        } else if (key == "model_architecture") {
            const std::string a = p.token();
            if (a == "patch_linear") {
                c.model.architecture = Architecture::PatchLinear;
            } else if (a == "small_conv") {
                c.model.architecture = Architecture::SmallConv;
            } else {
                throw ConfigError(path, line_no,
                                  "model_architecture must be patch_linear or small_conv");
            }
        } else if (key == "model_bottleneck") {
            c.model.bottleneck = p.integer();
            if (c.model.bottleneck < 1) {
                throw ConfigError(path, line_no, "model_bottleneck must be >= 1");
            }
        } else if (key == "model_patch_size") {
            c.model.patch_size = p.integer();
            if (c.model.patch_size < 1) {
                throw ConfigError(path, line_no, "model_patch_size must be >= 1");
            }
        } else if (key == "model_seed") {
            c.model.seed = static_cast<std::uint64_t>(p.num());
        } else if (key == "train_learning_rate") {
            c.train.learning_rate = p.num();
            if (c.train.learning_rate <= 0) {
                throw ConfigError(path, line_no, "train_learning_rate must be positive");
            }
        } else if (key == "train_batch_size") {
            c.train.batch_size = p.integer();
            if (c.train.batch_size < 1) {
                throw ConfigError(path, line_no, "train_batch_size must be >= 1");
            }
        } else if (key == "train_epochs") {
            c.train.epochs = p.integer();
            if (c.train.epochs < 1) throw ConfigError(path, line_no, "train_epochs must be >= 1");
        } else if (key == "train_input_width") {
            c.train.input_width = p.integer();
            if (c.train.input_width < 1) {
                throw ConfigError(path, line_no, "train_input_width must be >= 1");
            }
        } else if (key == "train_input_height") {
            c.train.input_height = p.integer();
            if (c.train.input_height < 1) {
                throw ConfigError(path, line_no, "train_input_height must be >= 1");
            }
        } else if (key == "train_split") {
            c.train.split = p.num();
            if (c.train.split <= 0 || c.train.split >= 1) {
                throw ConfigError(path, line_no, "train_split must lie in (0, 1)");
            }
        } else if (key == "train_seed") {
            c.train.seed = static_cast<std::uint64_t>(p.num());
        } else if (key == "train_mask_area_normalization") {
            c.train.mask_area_normalization = p.boolean();
        } else if (key == "eval_bins") {
            c.eval_bins = p.integer();
            if (c.eval_bins < 1) throw ConfigError(path, line_no, "eval_bins must be >= 1");
        } else if (key == "eval_granularity") {
            const std::string g = p.token();
            if (g == "pixel") {
                c.eval_granularity = EvalGranularity::Pixel;
            } else if (g == "image") {
                c.eval_granularity = EvalGranularity::Image;
            } else {
                throw ConfigError(path, line_no, "eval_granularity must be pixel or image");
            }
        } else if (key == "label_unlabeled" || key == "label_ground" || key == "label_vegetation") {
            const int v = p.integer();
            if (v < 0 || v > 255) throw ConfigError(path, line_no, key + " must lie in [0, 255]");
            auto& field = key == "label_unlabeled"
                              ? c.label_classes.unlabeled
                              : key == "label_ground" ? c.label_classes.ground
                                                      : c.label_classes.vegetation;
            field = static_cast<std::uint8_t>(v);
        } else if (key == "workers") {
            c.workers = p.integer();
            if (c.workers < 0) throw ConfigError(path, line_no, "workers must be >= 0");
        } else if (key == "output_dir") {
            c.output_dir = p.token();
        } else {
            throw ConfigError(path, line_no, "unknown key '" + key + "'");
        }
        p.done();
    }

    if (c.camera.fx <= 0 || c.camera.fy <= 0) {
        throw ConfigError(path, 0, "camera focal lengths must be positive");
    }
    if (c.camera.width < 1 || c.camera.height < 1) {
        throw ConfigError(path, 0, "camera dimensions must be positive");
    }
    const auto& lc = c.label_classes;
    if (lc.unlabeled == lc.ground || lc.unlabeled == lc.vegetation || lc.ground == lc.vegetation) {
        throw ConfigError(path, 0, "label class values must be distinct");
    }
    if (c.model.architecture == Architecture::PatchLinear &&
        (c.train.input_width % c.model.patch_size != 0 ||
         c.train.input_height % c.model.patch_size != 0)) {
        throw ConfigError(path, 0, "model_patch_size must divide train_input_width and height");
    }
    return c;
}

int resolve_workers(const RunConfig& config) {
    if (config.workers > 0) return config.workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace trailmark
