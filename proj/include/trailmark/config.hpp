#pragma once

#include <string>

#include "trailmark/eval.hpp"
#include "trailmark/geometry.hpp"
#include "trailmark/model.hpp"
#include "trailmark/occlusion.hpp"
#include "trailmark/trajectory.hpp"

namespace trailmark {

enum class EvalGranularity { Pixel, Image };

/// Every pipeline parameter, from a single versioned text file. The camera
/// block is used by dataset generation; ingestion stages take the camera
/// bound to the dataset via its manifest.
struct RunConfig {
    CameraModel camera;
    WheelGeometry wheels;
    ProjectionWindow window;
    OcclusionParams occlusion;
    ModelConfig model;
    TrainConfig train;
    int eval_bins = 32;
    EvalGranularity eval_granularity = EvalGranularity::Pixel;
    LabelClassMap label_classes;
    int workers = 0;  // 0 = one per available core
    std::string output_dir = "out";
};

/// Camera-from-body transform of a forward-looking camera 1.4 m above the
/// base link: optical axis along body +x, image x along body -y, image y
/// along body -z.
RigidTransform default_camera_extrinsic();

/// Parses a `trailmark-config v1` file. Unknown keys, malformed values, and
/// out-of-range parameters raise ConfigError with file and line position.
RunConfig load_config(const std::string& path);

/// Worker-pool size: the configured count, or the number of available cores
/// when the config says 0.
int resolve_workers(const RunConfig& config);

}  // namespace trailmark
