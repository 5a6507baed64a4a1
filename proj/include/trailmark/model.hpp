#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trailmark/image.hpp"

namespace trailmark {

enum class Architecture { PatchLinear = 0, SmallConv = 1 };

struct ModelConfig {
    Architecture architecture = Architecture::PatchLinear;
    int bottleneck = 256;
    int patch_size = 16;  // PatchLinear only
    std::uint64_t seed = 0;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 4;
    int epochs = 100;
    int input_width = 224;
    int input_height = 224;
    double split = 0.8;  // train fraction
    std::uint64_t seed = 0;
    bool mask_area_normalization = false;  // divide by sum(m) instead of w*h
};

/// Bottlenecked autoencoder with a flat parameter vector. Layouts (all
/// row-major, doubles; P = patch*patch*channels, F = 32*ceil(h/8)*ceil(w/8)):
///   PatchLinear: W_enc[n,P], b_enc[n], W_dec[P,n], b_dec[P]
///   SmallConv:   conv weights [out,in,3,3] + biases for channel chain
///                c->8->16->32 (stride 2, pad 1, tanh), W_enc[n,F], b_enc[n],
///                W_dec[F,n], b_dec[F], then mirrored transposed convolutions
///                32->16->8->c (tanh except the last layer).
struct ReconstructionModel {
    Architecture architecture = Architecture::PatchLinear;
    int bottleneck = 0;
    int patch_size = 0;
    int input_width = 0;
    int input_height = 0;
    int channels = 0;
    std::vector<double> params;
    double best_val_loss = 0.0;
    int best_epoch = -1;
};

struct TrainSample {
    ImageTensor image;
    BinaryMask mask;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    ReconstructionModel model;
    std::vector<EpochMetrics> metrics;
};

/// L = (1/(w*h)) * sum_ij m_ij * mean_c (xhat - x)^2. With
/// area_normalized, the divisor is sum(m) instead of w*h (0 when the mask
/// is empty).
double masked_loss(const ImageTensor& x, const ImageTensor& xhat, const BinaryMask& m,
                   bool area_normalized = false);

/// dL/dxhat, same shape as xhat: 2*m*(xhat - x) / (w*h*channels).
ImageTensor masked_loss_gradient(const ImageTensor& x, const ImageTensor& xhat,
                                 const BinaryMask& m, bool area_normalized = false);

/// Fresh model with seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init.
ReconstructionModel make_model(const ModelConfig& mc, int input_width, int input_height,
                               int channels);

std::size_t parameter_count(const ReconstructionModel& model);

/// Deterministic forward pass; output clamped to [0,1], same shape as input.
ImageTensor reconstruct(const ReconstructionModel& model, const ImageTensor& x);

/// Loss and d(loss)/d(params) for one sample (unclamped output, so the
/// gradient is exact). `grad` is accumulated into, so zero it first.
double model_loss_and_gradient(const ReconstructionModel& model, const ImageTensor& x,
                               const BinaryMask& m, bool area_normalized,
                               std::vector<double>& grad);

/// Mini-batch training with an internal seeded 80/20-style split, per-epoch
/// shuffling, and Adam updates; keeps the parameter snapshot with the lowest
/// validation loss. Deterministic given the config seeds.
TrainResult train(const std::vector<TrainSample>& dataset, const ModelConfig& mc,
                  const TrainConfig& tc);

/// Line-delimited `epoch train_loss val_loss`.
void save_metrics(const std::string& path, const std::vector<EpochMetrics>& metrics);

/// Versioned binary container: magic "TMCK", u32 version, u32 architecture,
/// u32 bottleneck/patch/width/height/channels, i32 best epoch, f64 best
/// validation loss, u64 count, then the parameters as little-endian f64.
void save_checkpoint(const std::string& path, const ReconstructionModel& model);
ReconstructionModel load_checkpoint(const std::string& path);

}  // namespace trailmark
