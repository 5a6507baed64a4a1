#pragma once

#include <string>
#include <vector>

#include "trailmark/geometry.hpp"
#include "trailmark/image.hpp"
#include "trailmark/occlusion.hpp"

namespace trailmark {

/// Shortest exact decimal for a double (%.17g); all text formats use it so
/// save-then-load is the identity.
std::string fmt_double(double v);

bool file_exists(const std::string& path);

/// 3-channel images as binary PPM (P6), 1-channel as binary PGM (P5),
/// 8 bits per sample. Values are quantized with round(255 * v).
void save_image(const std::string& path, const ImageTensor& image);
ImageTensor load_image(const std::string& path);

/// Masks as binary PGM, 255 = set. Loading maps any nonzero byte to 1.
void save_mask(const std::string& path, const BinaryMask& mask);
BinaryMask load_mask(const std::string& path);

/// Class-id maps as binary PGM with the ids stored verbatim.
void save_label_map(const std::string& path, const SemanticLabelMap& labels);
SemanticLabelMap load_label_map(const std::string& path);

/// ASCII PLY with double x/y/z and, when the cloud is classed, uchar class
/// (0 = surface, 1 = obstacle, 2 = ground).
void save_cloud(const std::string& path, const PointCloud& cloud);
PointCloud load_cloud(const std::string& path);

/// Line-delimited `timestamp tx ty tz qx qy qz qw`. Loading requires
/// strictly increasing timestamps and unit quaternions (tolerance 1e-6,
/// renormalized on ingest).
void save_poses(const std::string& path, const std::vector<Pose>& poses);
std::vector<Pose> load_poses(const std::string& path);

/// Versioned key-value text (`trailmark-camera v1`).
void save_camera(const std::string& path, const CameraModel& camera);
CameraModel load_camera(const std::string& path);

}  // namespace trailmark
