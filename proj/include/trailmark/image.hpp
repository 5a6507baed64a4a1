#pragma once

#include <cstdint>
#include <vector>

namespace trailmark {

/// Row-major, channel-interleaved image with values in [0, 1].
/// 1 channel = grayscale, 3 = RGB.
struct ImageTensor {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;  // size = width * height * channels

    ImageTensor() = default;
    ImageTensor(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Per-pixel {0, 1} mask; dimensions always match the associated image.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // values 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t count_set() const;
};

/// Per-pixel semantic class ids. The id -> class meaning (unlabeled /
/// ground / vegetation) is declared in the run configuration.
struct SemanticLabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    SemanticLabelMap() = default;
    SemanticLabelMap(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Bilinear resize with half-pixel center alignment and clamp-to-edge.
ImageTensor resize(const ImageTensor& x, int w, int h);

/// Nearest-neighbor resize; preserves binarity.
BinaryMask resize_mask(const BinaryMask& m, int w, int h);

/// Nearest-neighbor resize for class-valued 8-bit maps (same sampling grid
/// as resize_mask).
std::vector<std::uint8_t> resize_nearest_u8(const std::vector<std::uint8_t>& src,
                                            int sw, int sh, int w, int h);

/// Snaps values onto the 8-bit grid k/255 so that image files round-trip
/// exactly.
void quantize_to_8bit(ImageTensor& x);

}  // namespace trailmark
