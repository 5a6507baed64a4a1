#include "trailmark/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trailmark/errors.hpp"

namespace trailmark {

namespace {

std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw MissingFileError(path);
    return in;
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw DataError("cannot open for writing: " + path);
    return out;
}

// One whitespace-delimited netpbm header token; '#' starts a comment that
// runs to end of line. Consumes the single delimiter after the token, which
// is exactly where the raster begins after the maxval token.
std::string netpbm_token(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (tok.empty()) throw ParseError(path, 1, "truncated netpbm header");
    return tok;
}

int netpbm_int(std::istream& in, const std::string& path, const char* field) {
    const std::string tok = netpbm_token(in, path);
    try {
        std::size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(path, 1, std::string("bad netpbm ") + field + ": '" + tok + "'");
    }
}

// Reads magic/width/height/maxval and the raster that follows.
std::vector<std::uint8_t> load_netpbm(const std::string& path, const std::string& expect_magic,
                                      int samples_per_pixel, int& width, int& height) {
    auto in = open_input(path, std::ios::binary);
    const std::string magic = netpbm_token(in, path);
    if (magic != expect_magic) {
        throw ParseError(path, 1, "expected " + expect_magic + " file, got magic '" + magic + "'");
    }
    width = netpbm_int(in, path, "width");
    height = netpbm_int(in, path, "height");
    const int maxval = netpbm_int(in, path, "maxval");
    if (maxval != 255) throw ParseError(path, 1, "unsupported maxval " + std::to_string(maxval));
    std::vector<std::uint8_t> raster(static_cast<std::size_t>(width) * height * samples_per_pixel);
    in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (static_cast<std::size_t>(in.gcount()) != raster.size()) {
        throw ParseError(path, 1, "truncated raster in " + path);
    }
    return raster;
}

void save_netpbm(const std::string& path, const char* magic, int width, int height,
                 const std::vector<std::uint8_t>& raster) {
    auto out = open_output(path, std::ios::binary);
    out << magic << "\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.data()),
              static_cast<std::streamsize>(raster.size()));
    if (!out) throw DataError("write failed: " + path);
}

std::uint8_t to_byte(double v) {
    v = std::min(1.0, std::max(0.0, v));
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

double parse_double_field(const std::string& tok, const std::string& path, int line,
                          const char* field) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + tok.size() || tok.empty() || !std::isfinite(v)) {
        throw ParseError(path, line, std::string("bad ") + field + ": '" + tok + "'");
    }
    return v;
}

// Splits on whitespace; returns false for blank lines.
bool split_fields(const std::string& line, std::vector<std::string>& fields) {
    fields.clear();
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    return !fields.empty();
}

}  // namespace

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool file_exists(const std::string& path) {
    std::error_code ec;
    return std::filesystem::exists(path, ec);
}

void save_image(const std::string& path, const ImageTensor& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw DimensionMismatchError("images must have 1 or 3 channels, got " +
                                     std::to_string(image.channels));
    }
    std::vector<std::uint8_t> raster(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i) raster[i] = to_byte(image.data[i]);
    save_netpbm(path, image.channels == 3 ? "P6" : "P5", image.width, image.height, raster);
}

ImageTensor load_image(const std::string& path) {
    auto probe = open_input(path, std::ios::binary);
    const std::string magic = netpbm_token(probe, path);
    probe.close();
    const int channels = magic == "P6" ? 3 : 1;
    int w = 0, h = 0;
    const auto raster = load_netpbm(path, channels == 3 ? "P6" : "P5", channels, w, h);
    ImageTensor image(w, h, channels);
    for (std::size_t i = 0; i < raster.size(); ++i) image.data[i] = raster[i] / 255.0;
    return image;
}

void save_mask(const std::string& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> raster(mask.data.size());
    for (std::size_t i = 0; i < mask.data.size(); ++i) raster[i] = mask.data[i] ? 255 : 0;
    save_netpbm(path, "P5", mask.width, mask.height, raster);
}

BinaryMask load_mask(const std::string& path) {
    int w = 0, h = 0;
    const auto raster = load_netpbm(path, "P5", 1, w, h);
    BinaryMask mask(w, h);
    for (std::size_t i = 0; i < raster.size(); ++i) mask.data[i] = raster[i] ? 1 : 0;
    return mask;
}

void save_label_map(const std::string& path, const SemanticLabelMap& labels) {
    save_netpbm(path, "P5", labels.width, labels.height, labels.data);
}

SemanticLabelMap load_label_map(const std::string& path) {
    SemanticLabelMap labels;
    labels.data = load_netpbm(path, "P5", 1, labels.width, labels.height);
    return labels;
}

void save_cloud(const std::string& path, const PointCloud& cloud) {
    auto out = open_output(path);
    const bool classed = cloud.has_classes();
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
        << "\nproperty double x\nproperty double y\nproperty double z\n";
    if (classed) out << "property uchar class\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        out << fmt_double(p.x()) << " " << fmt_double(p.y()) << " " << fmt_double(p.z());
        if (classed) out << " " << static_cast<int>(cloud.classes[i]);
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

PointCloud load_cloud(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    std::vector<std::string> fields;
    int line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw ParseError(path, line_no, "unexpected end of file");
        ++line_no;
    };

    next_line();
    if (line != "ply") throw ParseError(path, line_no, "not a PLY file");
    next_line();
    if (line != "format ascii 1.0") throw ParseError(path, line_no, "unsupported PLY format");

    std::size_t vertex_count = 0;
    std::vector<std::string> properties;
    for (;;) {
        next_line();
        if (line == "end_header") break;
        if (!split_fields(line, fields)) continue;
        if (fields[0] == "comment") continue;
        if (fields[0] == "element") {
            if (fields.size() != 3 || fields[1] != "vertex") {
                throw ParseError(path, line_no, "unsupported element: " + line);
            }
            vertex_count = static_cast<std::size_t>(
                parse_double_field(fields[2], path, line_no, "vertex count"));
        } else if (fields[0] == "property") {
            if (fields.size() != 3) throw ParseError(path, line_no, "bad property: " + line);
            properties.push_back(fields[2]);
        } else {
            throw ParseError(path, line_no, "unsupported header line: " + line);
        }
    }
    const bool classed = properties.size() == 4 && properties[3] == "class";
    const std::vector<std::string> want = classed
        ? std::vector<std::string>{"x", "y", "z", "class"}
        : std::vector<std::string>{"x", "y", "z"};
    if (properties != want) throw ParseError(path, line_no, "unsupported property layout");

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    if (classed) cloud.classes.reserve(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        next_line();
        if (!split_fields(line, fields) || fields.size() != properties.size()) {
            throw ParseError(path, line_no, "expected " + std::to_string(properties.size()) +
                                                " fields, got '" + line + "'");
        }
        Vec3 p(parse_double_field(fields[0], path, line_no, "x"),
               parse_double_field(fields[1], path, line_no, "y"),
               parse_double_field(fields[2], path, line_no, "z"));
        if (p.isZero(0.0)) throw ParseError(path, line_no, "zero point");
        cloud.points.push_back(p);
        if (classed) {
            const double c = parse_double_field(fields[3], path, line_no, "class");
            if (c != 0.0 && c != 1.0 && c != 2.0) {
                throw ParseError(path, line_no, "class must be 0, 1, or 2");
            }
            cloud.classes.push_back(static_cast<std::uint8_t>(c));
        }
    }
    return cloud;
}

void save_poses(const std::string& path, const std::vector<Pose>& poses) {
    auto out = open_output(path);
    for (const Pose& p : poses) {
        out << fmt_double(p.timestamp) << " " << fmt_double(p.translation.x()) << " "
            << fmt_double(p.translation.y()) << " " << fmt_double(p.translation.z()) << " "
            << fmt_double(p.rotation.x()) << " " << fmt_double(p.rotation.y()) << " "
            << fmt_double(p.rotation.z()) << " " << fmt_double(p.rotation.w()) << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<Pose> load_poses(const std::string& path) {
    auto in = open_input(path);
    std::vector<Pose> poses;
    std::string line;
    std::vector<std::string> fields;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!split_fields(line, fields)) continue;
        if (fields.size() != 8) {
            throw ParseError(path, line_no, "expected 8 fields, got " +
                                                std::to_string(fields.size()));
        }
        Pose p;
        p.timestamp = parse_double_field(fields[0], path, line_no, "timestamp");
        p.translation = Vec3(parse_double_field(fields[1], path, line_no, "tx"),
                             parse_double_field(fields[2], path, line_no, "ty"),
                             parse_double_field(fields[3], path, line_no, "tz"));
        p.rotation = Quat(parse_double_field(fields[7], path, line_no, "qw"),
                          parse_double_field(fields[4], path, line_no, "qx"),
                          parse_double_field(fields[5], path, line_no, "qy"),
                          parse_double_field(fields[6], path, line_no, "qz"));
        if (std::abs(p.rotation.norm() - 1.0) > 1e-6) {
            throw ParseError(path, line_no, "quaternion norm " + fmt_double(p.rotation.norm()) +
                                                " is not 1");
        }
        p.rotation.normalize();
        if (!poses.empty() && p.timestamp <= poses.back().timestamp) {
            throw OrderViolationError(path + ":" + std::to_string(line_no) +
                                      ": pose timestamps must strictly increase");
        }
        poses.push_back(p);
    }
    return poses;
}

void save_camera(const std::string& path, const CameraModel& camera) {
    auto out = open_output(path);
    const RigidTransform& e = camera.extrinsic;
    out << "trailmark-camera v1\n";
    out << "fx " << fmt_double(camera.fx) << "\n";
    out << "fy " << fmt_double(camera.fy) << "\n";
    out << "cx " << fmt_double(camera.cx) << "\n";
    out << "cy " << fmt_double(camera.cy) << "\n";
    out << "width " << camera.width << "\n";
    out << "height " << camera.height << "\n";
    out << "extrinsic_translation " << fmt_double(e.translation.x()) << " "
        << fmt_double(e.translation.y()) << " " << fmt_double(e.translation.z()) << "\n";
    out << "extrinsic_rotation " << fmt_double(e.rotation.x()) << " " << fmt_double(e.rotation.y())
        << " " << fmt_double(e.rotation.z()) << " " << fmt_double(e.rotation.w()) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

CameraModel load_camera(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    std::vector<std::string> fields;
    int line_no = 0;
    if (!std::getline(in, line) || line != "trailmark-camera v1") {
        throw ParseError(path, 1, "expected header 'trailmark-camera v1'");
    }
    line_no = 1;
    CameraModel camera;
    bool have[8] = {};
    while (std::getline(in, line)) {
        ++line_no;
        if (!split_fields(line, fields)) continue;
        const std::string& key = fields[0];
        auto need = [&](std::size_t n) {
            if (fields.size() != n + 1) {
                throw ParseError(path, line_no, key + " expects " + std::to_string(n) +
                                                    " values");
            }
        };
        if (key == "fx") {
            need(1);
            camera.fx = parse_double_field(fields[1], path, line_no, "fx");
            have[0] = true;
        } else if (key == "fy") {
            need(1);
            camera.fy = parse_double_field(fields[1], path, line_no, "fy");
            have[1] = true;
        } else if (key == "cx") {
            need(1);
            camera.cx = parse_double_field(fields[1], path, line_no, "cx");
            have[2] = true;
        } else if (key == "cy") {
            need(1);
            camera.cy = parse_double_field(fields[1], path, line_no, "cy");
            have[3] = true;
        } else if (key == "width") {
            need(1);
            camera.width = static_cast<int>(parse_double_field(fields[1], path, line_no, "width"));
            have[4] = true;
        } else if (key == "height") {
            need(1);
            camera.height =
                static_cast<int>(parse_double_field(fields[1], path, line_no, "height"));
            have[5] = true;
        } else if (key == "extrinsic_translation") {
            need(3);
            camera.extrinsic.translation =
                Vec3(parse_double_field(fields[1], path, line_no, "tx"),
                     parse_double_field(fields[2], path, line_no, "ty"),
                     parse_double_field(fields[3], path, line_no, "tz"));
            have[6] = true;
        } else if (key == "extrinsic_rotation") {
            need(4);
            camera.extrinsic.rotation = Quat(parse_double_field(fields[4], path, line_no, "qw"),
                                             parse_double_field(fields[1], path, line_no, "qx"),
                                             parse_double_field(fields[2], path, line_no, "qy"),
                                             parse_double_field(fields[3], path, line_no, "qz"));
            if (std::abs(camera.extrinsic.rotation.norm() - 1.0) > 1e-6) {
                throw ParseError(path, line_no, "quaternion norm is not 1");
            }
            camera.extrinsic.rotation.normalize();
            have[7] = true;
        } else {
            throw ParseError(path, line_no, "unknown key '" + key + "'");
        }
    }
    static const char* names[8] = {"fx", "fy", "cx", "cy", "width", "height",
                                   "extrinsic_translation", "extrinsic_rotation"};
    for (int i = 0; i < 8; ++i) {
        if (!have[i]) throw ParseError(path, line_no, std::string("missing key ") + names[i]);
    }
    if (camera.fx <= 0 || camera.fy <= 0) throw ParseError(path, line_no, "focal lengths must be positive");
    if (camera.width <= 0 || camera.height <= 0) {
        throw ParseError(path, line_no, "image size must be positive");
    }
    return camera;
}

}  // namespace trailmark
