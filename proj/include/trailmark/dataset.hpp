#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace trailmark {

struct FrameRecord {
    std::string id;
    double timestamp = 0.0;
    std::string image_path;  // relative to the manifest directory
    std::string cloud_path;
    // Optional per-frame artifacts: mask, label, risk, recon.
    std::map<std::string, std::string> extras;
};

struct DatasetManifest {
    std::string name = "dataset";
    std::string camera_path;
    std::string poses_path;
    std::string vehicle_mask_path;
    double tolerance = 0.05;  // image/cloud association tolerance, seconds
    std::vector<FrameRecord> frames;
    std::string base_dir;  // directory of the manifest file; not serialized
};

std::string resolve_path(const DatasetManifest& m, const std::string& rel);

/// Eagerly validated: version header, unique frame ids, non-decreasing
/// timestamps, and every referenced artifact exists, parses, and matches
/// the camera's image dimensions.
DatasetManifest load_manifest(const std::string& path);

/// Canonical field order and %.17g numbers, so save-then-load round-trips
/// byte-identically.
void save_manifest(const std::string& path, const DatasetManifest& m);

/// Seeded uniform shuffle, then the first floor(n * fraction) frames form
/// the train part; both parts keep the original frame order. Disjoint,
/// union = input.
std::pair<DatasetManifest, DatasetManifest> split_manifest(const DatasetManifest& m,
                                                           double fraction, std::uint64_t seed);

}  // namespace trailmark
