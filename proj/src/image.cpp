#include "trailmark/image.hpp"

#include <algorithm>
#include <cmath>

namespace trailmark {

std::size_t BinaryMask::count_set() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v;
    return n;
}

namespace {

// Source coordinate of destination pixel d under half-pixel alignment.
inline double src_coord(int d, int dst_size, int src_size) {
    return (d + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

ImageTensor resize(const ImageTensor& x, int w, int h) {
    if (w == x.width && h == x.height) return x;
    ImageTensor out(w, h, x.channels);
    for (int y = 0; y < h; ++y) {
        const double sy = src_coord(y, h, x.height);
        const int yf = static_cast<int>(std::floor(sy));
        const int y0 = clampi(yf, 0, x.height - 1);
        const int y1 = clampi(yf + 1, 0, x.height - 1);
        const double fy = std::clamp(sy - yf, 0.0, 1.0);
        for (int xx = 0; xx < w; ++xx) {
            const double sx = src_coord(xx, w, x.width);
            const int xf = static_cast<int>(std::floor(sx));
            const int x0 = clampi(xf, 0, x.width - 1);
            const int x1 = clampi(xf + 1, 0, x.width - 1);
            const double fx = std::clamp(sx - xf, 0.0, 1.0);
            for (int c = 0; c < x.channels; ++c) {
                const double top = (1.0 - fx) * x.at(x0, y0, c) + fx * x.at(x1, y0, c);
                const double bot = (1.0 - fx) * x.at(x0, y1, c) + fx * x.at(x1, y1, c);
                out.at(xx, y, c) = (1.0 - fy) * top + fy * bot;
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> resize_nearest_u8(const std::vector<std::uint8_t>& src,
                                            int sw, int sh, int w, int h) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const int sy = clampi(static_cast<int>(std::llround(src_coord(y, h, sh))), 0, sh - 1);
        for (int x = 0; x < w; ++x) {
            const int sx = clampi(static_cast<int>(std::llround(src_coord(x, w, sw))), 0, sw - 1);
            out[static_cast<std::size_t>(y) * w + x] = src[static_cast<std::size_t>(sy) * sw + sx];
        }
    }
    return out;
}

BinaryMask resize_mask(const BinaryMask& m, int w, int h) {
    if (w == m.width && h == m.height) return m;
    BinaryMask out(w, h);
    out.data = resize_nearest_u8(m.data, m.width, m.height, w, h);
    return out;
}

void quantize_to_8bit(ImageTensor& x) {
    for (double& v : x.data) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        v = std::nearbyint(clamped * 255.0) / 255.0;
    }
}

}  // namespace trailmark
