#include "trailmark/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "trailmark/errors.hpp"
#include "trailmark/io.hpp"
#include "trailmark/rng.hpp"

namespace trailmark {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

void check_pair_dims(const ImageTensor& x, const ImageTensor& xhat, const BinaryMask& m) {
    if (x.width != xhat.width || x.height != xhat.height || x.channels != xhat.channels) {
        throw DimensionMismatchError("image pair dimensions differ");
    }
    if (m.width != x.width || m.height != x.height) {
        throw DimensionMismatchError("mask dimensions differ from image");
    }
}

// ---- PatchLinear ----------------------------------------------------------

struct PatchDims {
    int n = 0, P = 0, gw = 0, gh = 0, M = 0;
    std::size_t We = 0, be = 0, Wd = 0, bd = 0, total = 0;
};

PatchDims patch_dims(int bottleneck, int patch, int width, int height, int channels) {
    PatchDims d;
    d.n = bottleneck;
    d.P = patch * patch * channels;
    d.gw = width / patch;
    d.gh = height / patch;
    d.M = d.gw * d.gh;
    d.We = 0;
    d.be = d.We + static_cast<std::size_t>(d.n) * d.P;
    d.Wd = d.be + d.n;
    d.bd = d.Wd + static_cast<std::size_t>(d.P) * d.n;
    d.total = d.bd + d.P;
    return d;
}

// Column m of X holds patch m with element order ((c*patch + dy)*patch + dx).
Eigen::MatrixXd gather_patches(const ImageTensor& x, int patch, const PatchDims& d) {
    Eigen::MatrixXd X(d.P, d.M);
    for (int gy = 0; gy < d.gh; ++gy) {
        for (int gx = 0; gx < d.gw; ++gx) {
            const int m = gy * d.gw + gx;
            int e = 0;
            for (int c = 0; c < x.channels; ++c) {
                for (int dy = 0; dy < patch; ++dy) {
                    for (int dx = 0; dx < patch; ++dx) {
                        X(e++, m) = x.at(gx * patch + dx, gy * patch + dy, c);
                    }
                }
            }
        }
    }
    return X;
}

void scatter_patches(const Eigen::MatrixXd& Xh, int patch, const PatchDims& d, ImageTensor& out) {
    for (int gy = 0; gy < d.gh; ++gy) {
        for (int gx = 0; gx < d.gw; ++gx) {
            const int m = gy * d.gw + gx;
            int e = 0;
            for (int c = 0; c < out.channels; ++c) {
                for (int dy = 0; dy < patch; ++dy) {
                    for (int dx = 0; dx < patch; ++dx) {
                        out.at(gx * patch + dx, gy * patch + dy, c) = Xh(e++, m);
                    }
                }
            }
        }
    }
}

ImageTensor forward_patch(const ReconstructionModel& model, const ImageTensor& x,
                          Eigen::MatrixXd* X_out, Eigen::MatrixXd* Z_out) {
    const PatchDims d = patch_dims(model.bottleneck, model.patch_size, model.input_width,
                                   model.input_height, model.channels);
    const double* p = model.params.data();
    MapConstMat We(p + d.We, d.n, d.P);
    MapConstVec be(p + d.be, d.n);
    MapConstMat Wd(p + d.Wd, d.P, d.n);
    MapConstVec bd(p + d.bd, d.P);

    Eigen::MatrixXd X = gather_patches(x, model.patch_size, d);
    Eigen::MatrixXd Z = (We * X).colwise() + be;
    Eigen::MatrixXd Xh = (Wd * Z).colwise() + bd;

    ImageTensor out(model.input_width, model.input_height, model.channels);
    scatter_patches(Xh, model.patch_size, d, out);
    if (X_out) *X_out = std::move(X);
    if (Z_out) *Z_out = std::move(Z);
    return out;
}

void backward_patch(const ReconstructionModel& model, const Eigen::MatrixXd& X,
                    const Eigen::MatrixXd& Z, const ImageTensor& dout,
                    std::vector<double>& grad) {
    const PatchDims d = patch_dims(model.bottleneck, model.patch_size, model.input_width,
                                   model.input_height, model.channels);
    const double* p = model.params.data();
    MapConstMat Wd(p + d.Wd, d.P, d.n);
    double* g = grad.data();
    MapMat dWe(g + d.We, d.n, d.P);
    MapVec dbe(g + d.be, d.n);
    MapMat dWd(g + d.Wd, d.P, d.n);
    MapVec dbd(g + d.bd, d.P);

    const Eigen::MatrixXd dXh = gather_patches(dout, model.patch_size, d);
    dWd.noalias() += dXh * Z.transpose();
    dbd += dXh.rowwise().sum();
    const Eigen::MatrixXd dZ = Wd.transpose() * dXh;
    dWe.noalias() += dZ * X.transpose();
    dbe += dZ.rowwise().sum();
}

// ---- SmallConv -------------------------------------------------------------

// Fixed channel chain c -> 8 -> 16 -> 32, kernel 3, stride 2, pad 1.
struct ConvDims {
    int C = 0, H = 0, W = 0;
    int c1 = 8, c2 = 16, c3 = 32;
    int h1 = 0, w1 = 0, h2 = 0, w2 = 0, h3 = 0, w3 = 0;
    int F = 0, n = 0;
    std::size_t W1 = 0, b1 = 0, W2 = 0, b2 = 0, W3 = 0, b3 = 0;
    std::size_t We = 0, be = 0, Wd = 0, bd = 0;
    std::size_t V3 = 0, v3b = 0, V2 = 0, v2b = 0, V1 = 0, v1b = 0;
    std::size_t total = 0;
};

int half_up(int d) { return (d + 1) / 2; }

ConvDims conv_dims(int bottleneck, int width, int height, int channels) {
    ConvDims d;
    d.C = channels;
    d.H = height;
    d.W = width;
    d.h1 = half_up(d.H);
    d.w1 = half_up(d.W);
    d.h2 = half_up(d.h1);
    d.w2 = half_up(d.w1);
    d.h3 = half_up(d.h2);
    d.w3 = half_up(d.w2);
    d.F = d.c3 * d.h3 * d.w3;
    d.n = bottleneck;
    std::size_t off = 0;
    auto take = [&off](std::size_t count) {
        const std::size_t at = off;
        off += count;
        return at;
    };
    d.W1 = take(static_cast<std::size_t>(d.c1) * d.C * 9);
    d.b1 = take(d.c1);
    d.W2 = take(static_cast<std::size_t>(d.c2) * d.c1 * 9);
    d.b2 = take(d.c2);
    d.W3 = take(static_cast<std::size_t>(d.c3) * d.c2 * 9);
    d.b3 = take(d.c3);
    d.We = take(static_cast<std::size_t>(d.n) * d.F);
    d.be = take(d.n);
    d.Wd = take(static_cast<std::size_t>(d.F) * d.n);
    d.bd = take(d.F);
    d.V3 = take(static_cast<std::size_t>(d.c3) * d.c2 * 9);
    d.v3b = take(d.c2);
    d.V2 = take(static_cast<std::size_t>(d.c2) * d.c1 * 9);
    d.v2b = take(d.c1);
    d.V1 = take(static_cast<std::size_t>(d.c1) * d.C * 9);
    d.v1b = take(d.C);
    d.total = off;
    return d;
}

// Planar layout: t[(c*H + y)*W + x].
std::vector<double> to_planar(const ImageTensor& x) {
    std::vector<double> p(x.data.size());
    for (int c = 0; c < x.channels; ++c) {
        for (int y = 0; y < x.height; ++y) {
            for (int xx = 0; xx < x.width; ++xx) {
                p[(static_cast<std::size_t>(c) * x.height + y) * x.width + xx] = x.at(xx, y, c);
            }
        }
    }
    return p;
}

ImageTensor from_planar(const std::vector<double>& p, int width, int height, int channels) {
    ImageTensor x(width, height, channels);
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int xx = 0; xx < width; ++xx) {
                x.at(xx, y, c) = p[(static_cast<std::size_t>(c) * height + y) * width + xx];
            }
        }
    }
    return x;
}

inline std::size_t widx(int o, int c, int C, int ki, int kj) {
    return (static_cast<std::size_t>(o) * C + c) * 9 + ki * 3 + kj;
}

// out[o,i,j] = bias[o] + sum_{c,ki,kj} Wt[o,c,ki,kj] * in[c, 2i+ki-1, 2j+kj-1]
void conv_fwd(const double* in, int C, int H, int W, const double* Wt, const double* bias, int O,
              double* out, int HO, int WO) {
    for (int o = 0; o < O; ++o) {
        for (int i = 0; i < HO; ++i) {
            for (int j = 0; j < WO; ++j) {
                double acc = bias ? bias[o] : 0.0;
                for (int c = 0; c < C; ++c) {
                    const double* plane = in + static_cast<std::size_t>(c) * H * W;
                    for (int ki = 0; ki < 3; ++ki) {
                        const int y = 2 * i + ki - 1;
                        if (y < 0 || y >= H) continue;
                        for (int kj = 0; kj < 3; ++kj) {
                            const int x = 2 * j + kj - 1;
                            if (x < 0 || x >= W) continue;
                            acc += Wt[widx(o, c, C, ki, kj)] * plane[y * W + x];
                        }
                    }
                }
                out[(static_cast<std::size_t>(o) * HO + i) * WO + j] = acc;
            }
        }
    }
}

// Adjoint of conv_fwd: scatters z[o,i,j] back to the (C,H,W) grid. u must be
// zeroed by the caller.
void conv_adj(const double* z, int O, int HO, int WO, const double* Wt, int C, int H, int W,
              double* u) {
    for (int o = 0; o < O; ++o) {
        for (int i = 0; i < HO; ++i) {
            for (int j = 0; j < WO; ++j) {
                const double zv = z[(static_cast<std::size_t>(o) * HO + i) * WO + j];
                for (int c = 0; c < C; ++c) {
                    double* plane = u + static_cast<std::size_t>(c) * H * W;
                    for (int ki = 0; ki < 3; ++ki) {
                        const int y = 2 * i + ki - 1;
                        if (y < 0 || y >= H) continue;
                        for (int kj = 0; kj < 3; ++kj) {
                            const int x = 2 * j + kj - 1;
                            if (x < 0 || x >= W) continue;
                            plane[y * W + x] += Wt[widx(o, c, C, ki, kj)] * zv;
                        }
                    }
                }
            }
        }
    }
}

// dW[o,c,ki,kj] += sum_{i,j} dy[o,i,j] * x[c, 2i+ki-1, 2j+kj-1]
void conv_wgrad(const double* xs, int C, int H, int W, const double* dys, int O, int HO, int WO,
                double* dW) {
    for (int o = 0; o < O; ++o) {
        for (int i = 0; i < HO; ++i) {
            for (int j = 0; j < WO; ++j) {
                const double dyv = dys[(static_cast<std::size_t>(o) * HO + i) * WO + j];
                if (dyv == 0.0) continue;
                for (int c = 0; c < C; ++c) {
                    const double* plane = xs + static_cast<std::size_t>(c) * H * W;
                    for (int ki = 0; ki < 3; ++ki) {
                        const int y = 2 * i + ki - 1;
                        if (y < 0 || y >= H) continue;
                        for (int kj = 0; kj < 3; ++kj) {
                            const int x = 2 * j + kj - 1;
                            if (x < 0 || x >= W) continue;
                            dW[widx(o, c, C, ki, kj)] += dyv * plane[y * W + x];
                        }
                    }
                }
            }
        }
    }
}

void tanh_inplace(std::vector<double>& v) {
    for (double& x : v) x = std::tanh(x);
}

// dz = da * (1 - a^2), written into da.
void tanh_backward(std::vector<double>& da, const std::vector<double>& a) {
    for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 1.0 - a[i] * a[i];
}

void add_channel_bias(std::vector<double>& t, const double* bias, int C, int plane) {
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i < plane; ++i) t[static_cast<std::size_t>(c) * plane + i] += bias[c];
    }
}

struct ConvTrace {
    std::vector<double> x0, a1, a2, a3, ab, ag, s2, s1;
};

ImageTensor forward_conv(const ReconstructionModel& model, const ImageTensor& x,
                         ConvTrace* trace) {
    const ConvDims d = conv_dims(model.bottleneck, model.input_width, model.input_height,
                                 model.channels);
    const double* p = model.params.data();

    std::vector<double> x0 = to_planar(x);
    std::vector<double> a1(static_cast<std::size_t>(d.c1) * d.h1 * d.w1);
    conv_fwd(x0.data(), d.C, d.H, d.W, p + d.W1, p + d.b1, d.c1, a1.data(), d.h1, d.w1);
    tanh_inplace(a1);
    std::vector<double> a2(static_cast<std::size_t>(d.c2) * d.h2 * d.w2);
    conv_fwd(a1.data(), d.c1, d.h1, d.w1, p + d.W2, p + d.b2, d.c2, a2.data(), d.h2, d.w2);
    tanh_inplace(a2);
    std::vector<double> a3(static_cast<std::size_t>(d.c3) * d.h3 * d.w3);
    conv_fwd(a2.data(), d.c2, d.h2, d.w2, p + d.W3, p + d.b3, d.c3, a3.data(), d.h3, d.w3);
    tanh_inplace(a3);

    MapConstMat We(p + d.We, d.n, d.F);
    MapConstVec be(p + d.be, d.n);
    MapConstMat Wd(p + d.Wd, d.F, d.n);
    MapConstVec bd(p + d.bd, d.F);
    MapConstVec f(a3.data(), d.F);
    std::vector<double> ab(d.n);
    MapVec(ab.data(), d.n) = We * f + be;
    tanh_inplace(ab);
    std::vector<double> ag(d.F);
    MapVec(ag.data(), d.F) = Wd * MapConstVec(ab.data(), d.n) + bd;
    tanh_inplace(ag);

    std::vector<double> s2(static_cast<std::size_t>(d.c2) * d.h2 * d.w2, 0.0);
    conv_adj(ag.data(), d.c3, d.h3, d.w3, p + d.V3, d.c2, d.h2, d.w2, s2.data());
    add_channel_bias(s2, p + d.v3b, d.c2, d.h2 * d.w2);
    tanh_inplace(s2);
    std::vector<double> s1(static_cast<std::size_t>(d.c1) * d.h1 * d.w1, 0.0);
    conv_adj(s2.data(), d.c2, d.h2, d.w2, p + d.V2, d.c1, d.h1, d.w1, s1.data());
    add_channel_bias(s1, p + d.v2b, d.c1, d.h1 * d.w1);
    tanh_inplace(s1);
    std::vector<double> y(static_cast<std::size_t>(d.C) * d.H * d.W, 0.0);
    conv_adj(s1.data(), d.c1, d.h1, d.w1, p + d.V1, d.C, d.H, d.W, y.data());
    add_channel_bias(y, p + d.v1b, d.C, d.H * d.W);

    ImageTensor out = from_planar(y, d.W, d.H, d.C);
    if (trace) {
        trace->x0 = std::move(x0);
        trace->a1 = std::move(a1);
        trace->a2 = std::move(a2);
        trace->a3 = std::move(a3);
        trace->ab = std::move(ab);
        trace->ag = std::move(ag);
        trace->s2 = std::move(s2);
        trace->s1 = std::move(s1);
    }
    return out;
}

void backward_conv(const ReconstructionModel& model, const ConvTrace& t, const ImageTensor& dout,
                   std::vector<double>& grad) {
    const ConvDims d = conv_dims(model.bottleneck, model.input_width, model.input_height,
                                 model.channels);
    const double* p = model.params.data();
    double* g = grad.data();

    const std::vector<double> dy = to_planar(dout);

    // Final (linear) transposed convolution.
    for (int c = 0; c < d.C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < d.H * d.W; ++i) acc += dy[static_cast<std::size_t>(c) * d.H * d.W + i];
        g[d.v1b + c] += acc;
    }
    conv_wgrad(dy.data(), d.C, d.H, d.W, t.s1.data(), d.c1, d.h1, d.w1, g + d.V1);
    std::vector<double> ds1(t.s1.size());
    conv_fwd(dy.data(), d.C, d.H, d.W, p + d.V1, nullptr, d.c1, ds1.data(), d.h1, d.w1);
    tanh_backward(ds1, t.s1);

    for (int c = 0; c < d.c1; ++c) {
        double acc = 0.0;
        for (int i = 0; i < d.h1 * d.w1; ++i) {
            acc += ds1[static_cast<std::size_t>(c) * d.h1 * d.w1 + i];
        }
        g[d.v2b + c] += acc;
    }
    conv_wgrad(ds1.data(), d.c1, d.h1, d.w1, t.s2.data(), d.c2, d.h2, d.w2, g + d.V2);
    std::vector<double> ds2(t.s2.size());
    conv_fwd(ds1.data(), d.c1, d.h1, d.w1, p + d.V2, nullptr, d.c2, ds2.data(), d.h2, d.w2);
    tanh_backward(ds2, t.s2);

    for (int c = 0; c < d.c2; ++c) {
        double acc = 0.0;
        for (int i = 0; i < d.h2 * d.w2; ++i) {
            acc += ds2[static_cast<std::size_t>(c) * d.h2 * d.w2 + i];
        }
        g[d.v3b + c] += acc;
    }
    conv_wgrad(ds2.data(), d.c2, d.h2, d.w2, t.ag.data(), d.c3, d.h3, d.w3, g + d.V3);
    std::vector<double> dag(t.ag.size());
    conv_fwd(ds2.data(), d.c2, d.h2, d.w2, p + d.V3, nullptr, d.c3, dag.data(), d.h3, d.w3);
    tanh_backward(dag, t.ag);

    MapConstMat We(p + d.We, d.n, d.F);
    MapConstMat Wd(p + d.Wd, d.F, d.n);
    MapMat dWe(g + d.We, d.n, d.F);
    MapVec dbe(g + d.be, d.n);
    MapMat dWd(g + d.Wd, d.F, d.n);
    MapVec dbd(g + d.bd, d.F);

    MapConstVec dg(dag.data(), d.F);
    MapConstVec ab(t.ab.data(), d.n);
    dWd.noalias() += dg * ab.transpose();
    dbd += dg;
    std::vector<double> dab(d.n);
    MapVec(dab.data(), d.n) = Wd.transpose() * dg;
    tanh_backward(dab, t.ab);

    MapConstVec dzb(dab.data(), d.n);
    MapConstVec f(t.a3.data(), d.F);
    dWe.noalias() += dzb * f.transpose();
    dbe += dzb;
    std::vector<double> da3(d.F);
    MapVec(da3.data(), d.F) = We.transpose() * dzb;
    tanh_backward(da3, t.a3);

    for (int o = 0; o < d.c3; ++o) {
        double acc = 0.0;
        for (int i = 0; i < d.h3 * d.w3; ++i) {
            acc += da3[static_cast<std::size_t>(o) * d.h3 * d.w3 + i];
        }
        g[d.b3 + o] += acc;
    }
    conv_wgrad(t.a2.data(), d.c2, d.h2, d.w2, da3.data(), d.c3, d.h3, d.w3, g + d.W3);
    std::vector<double> da2(t.a2.size(), 0.0);
    conv_adj(da3.data(), d.c3, d.h3, d.w3, p + d.W3, d.c2, d.h2, d.w2, da2.data());
    tanh_backward(da2, t.a2);

    for (int o = 0; o < d.c2; ++o) {
        double acc = 0.0;
        for (int i = 0; i < d.h2 * d.w2; ++i) {
            acc += da2[static_cast<std::size_t>(o) * d.h2 * d.w2 + i];
        }
        g[d.b2 + o] += acc;
    }
    conv_wgrad(t.a1.data(), d.c1, d.h1, d.w1, da2.data(), d.c2, d.h2, d.w2, g + d.W2);
    std::vector<double> da1(t.a1.size(), 0.0);
    conv_adj(da2.data(), d.c2, d.h2, d.w2, p + d.W2, d.c1, d.h1, d.w1, da1.data());
    tanh_backward(da1, t.a1);

    for (int o = 0; o < d.c1; ++o) {
        double acc = 0.0;
        for (int i = 0; i < d.h1 * d.w1; ++i) {
            acc += da1[static_cast<std::size_t>(o) * d.h1 * d.w1 + i];
        }
        g[d.b1 + o] += acc;
    }
    conv_wgrad(t.x0.data(), d.C, d.H, d.W, da1.data(), d.c1, d.h1, d.w1, g + d.W1);
}

ImageTensor forward_unclamped(const ReconstructionModel& model, const ImageTensor& x) {
    if (x.width != model.input_width || x.height != model.input_height ||
        x.channels != model.channels) {
        throw DimensionMismatchError("input dimensions do not match the model");
    }
    if (model.architecture == Architecture::PatchLinear) {
        return forward_patch(model, x, nullptr, nullptr);
    }
    return forward_conv(model, x, nullptr);
}

void init_segment(std::vector<double>& params, std::size_t off, std::size_t count, int fan_in,
                  Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) params[off + i] = rng.uniform(-bound, bound);
}

}  // namespace

double masked_loss(const ImageTensor& x, const ImageTensor& xhat, const BinaryMask& m,
                   bool area_normalized) {
    check_pair_dims(x, xhat, m);
    double total = 0.0;
    for (int y = 0; y < x.height; ++y) {
        for (int xx = 0; xx < x.width; ++xx) {
            if (!m.at(xx, y)) continue;
            double pix = 0.0;
            for (int c = 0; c < x.channels; ++c) {
                const double dd = xhat.at(xx, y, c) - x.at(xx, y, c);
                pix += dd * dd;
            }
            total += pix / x.channels;
        }
    }
    const double divisor =
        area_normalized ? static_cast<double>(m.count_set()) : static_cast<double>(x.pixel_count());
    if (divisor == 0.0) return 0.0;
    return total / divisor;
}

ImageTensor masked_loss_gradient(const ImageTensor& x, const ImageTensor& xhat,
                                 const BinaryMask& m, bool area_normalized) {
    check_pair_dims(x, xhat, m);
    ImageTensor grad(x.width, x.height, x.channels);
    const double divisor =
        area_normalized ? static_cast<double>(m.count_set()) : static_cast<double>(x.pixel_count());
    if (divisor == 0.0) return grad;
    const double scale = 2.0 / (divisor * x.channels);
    for (int y = 0; y < x.height; ++y) {
        for (int xx = 0; xx < x.width; ++xx) {
            if (!m.at(xx, y)) continue;
            for (int c = 0; c < x.channels; ++c) {
                grad.at(xx, y, c) = scale * (xhat.at(xx, y, c) - x.at(xx, y, c));
            }
        }
    }
    return grad;
}

std::size_t parameter_count(const ReconstructionModel& model) {
    if (model.architecture == Architecture::PatchLinear) {
        return patch_dims(model.bottleneck, model.patch_size, model.input_width,
                          model.input_height, model.channels)
            .total;
    }
    return conv_dims(model.bottleneck, model.input_width, model.input_height, model.channels)
        .total;
}

ReconstructionModel make_model(const ModelConfig& mc, int input_width, int input_height,
                               int channels) {
    if (mc.bottleneck < 1) throw DimensionMismatchError("bottleneck must be >= 1");
    if (input_width < 1 || input_height < 1 || (channels != 1 && channels != 3)) {
        throw DimensionMismatchError("bad model input dimensions");
    }
    ReconstructionModel model;
    model.architecture = mc.architecture;
    model.bottleneck = mc.bottleneck;
    model.patch_size = mc.patch_size;
    model.input_width = input_width;
    model.input_height = input_height;
    model.channels = channels;
    Rng rng(mc.seed);
    if (mc.architecture == Architecture::PatchLinear) {
        if (mc.patch_size < 1 || input_width % mc.patch_size != 0 ||
            input_height % mc.patch_size != 0) {
            throw DimensionMismatchError("input size must be a multiple of the patch size");
        }
        const PatchDims d =
            patch_dims(mc.bottleneck, mc.patch_size, input_width, input_height, channels);
        model.params.assign(d.total, 0.0);
        init_segment(model.params, d.We, static_cast<std::size_t>(d.n) * d.P, d.P, rng);
        init_segment(model.params, d.be, d.n, d.P, rng);
        init_segment(model.params, d.Wd, static_cast<std::size_t>(d.P) * d.n, d.n, rng);
        init_segment(model.params, d.bd, d.P, d.n, rng);
    } else {
        const ConvDims d = conv_dims(mc.bottleneck, input_width, input_height, channels);
        model.params.assign(d.total, 0.0);
        init_segment(model.params, d.W1, static_cast<std::size_t>(d.c1) * d.C * 9, d.C * 9, rng);
        init_segment(model.params, d.b1, d.c1, d.C * 9, rng);
        init_segment(model.params, d.W2, static_cast<std::size_t>(d.c2) * d.c1 * 9, d.c1 * 9, rng);
        init_segment(model.params, d.b2, d.c2, d.c1 * 9, rng);
        init_segment(model.params, d.W3, static_cast<std::size_t>(d.c3) * d.c2 * 9, d.c2 * 9, rng);
        init_segment(model.params, d.b3, d.c3, d.c2 * 9, rng);
        init_segment(model.params, d.We, static_cast<std::size_t>(d.n) * d.F, d.F, rng);
        init_segment(model.params, d.be, d.n, d.F, rng);
        init_segment(model.params, d.Wd, static_cast<std::size_t>(d.F) * d.n, d.n, rng);
        init_segment(model.params, d.bd, d.F, d.n, rng);
        init_segment(model.params, d.V3, static_cast<std::size_t>(d.c3) * d.c2 * 9, d.c3 * 9, rng);
        init_segment(model.params, d.v3b, d.c2, d.c3 * 9, rng);
        init_segment(model.params, d.V2, static_cast<std::size_t>(d.c2) * d.c1 * 9, d.c2 * 9, rng);
        init_segment(model.params, d.v2b, d.c1, d.c2 * 9, rng);
        init_segment(model.params, d.V1, static_cast<std::size_t>(d.c1) * d.C * 9, d.c1 * 9, rng);
        init_segment(model.params, d.v1b, d.C, d.c1 * 9, rng);
    }
    return model;
}

ImageTensor reconstruct(const ReconstructionModel& model, const ImageTensor& x) {
    ImageTensor out = forward_unclamped(model, x);
    for (double& v : out.data) v = std::min(1.0, std::max(0.0, v));
    return out;
}

double model_loss_and_gradient(const ReconstructionModel& model, const ImageTensor& x,
                               const BinaryMask& m, bool area_normalized,
                               std::vector<double>& grad) {
    if (grad.size() != model.params.size()) {
        throw DimensionMismatchError("gradient buffer size does not match parameter count");
    }
    if (model.architecture == Architecture::PatchLinear) {
        Eigen::MatrixXd X, Z;
        const ImageTensor xhat = forward_patch(model, x, &X, &Z);
        const double loss = masked_loss(x, xhat, m, area_normalized);
        const ImageTensor dxhat = masked_loss_gradient(x, xhat, m, area_normalized);
        backward_patch(model, X, Z, dxhat, grad);
        return loss;
    }
    ConvTrace trace;
    const ImageTensor xhat = forward_conv(model, x, &trace);
    const double loss = masked_loss(x, xhat, m, area_normalized);
    const ImageTensor dxhat = masked_loss_gradient(x, xhat, m, area_normalized);
    backward_conv(model, trace, dxhat, grad);
    return loss;
}

TrainResult train(const std::vector<TrainSample>& dataset, const ModelConfig& mc,
                  const TrainConfig& tc) {
    if (dataset.empty()) throw EmptyDatasetError("training dataset is empty");

    const int channels = dataset[0].image.channels;
    std::vector<TrainSample> resized(dataset.size());
    bool any_mask = false;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].image.channels != channels) {
            throw DimensionMismatchError("mixed channel counts in training dataset");
        }
        resized[i].image = resize(dataset[i].image, tc.input_width, tc.input_height);
        resized[i].mask = resize_mask(dataset[i].mask, tc.input_width, tc.input_height);
        any_mask = any_mask || resized[i].mask.count_set() > 0;
    }
    if (!any_mask) throw AllMasksEmptyError("every training mask is empty");

    Rng rng(tc.seed);
    std::vector<std::size_t> order(resized.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t train_count =
        static_cast<std::size_t>(std::floor(static_cast<double>(order.size()) * tc.split));
    train_count = std::max<std::size_t>(1, std::min(train_count, order.size()));
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + train_count);
    std::vector<std::size_t> val_idx(order.begin() + train_count, order.end());
    if (val_idx.empty()) val_idx = train_idx;  // degenerate split: validate on train

    ReconstructionModel model = make_model(mc, tc.input_width, tc.input_height, channels);
    const std::size_t np = model.params.size();
    std::vector<double> grad(np), m1(np, 0.0), m2(np, 0.0);
    std::vector<double> best_params = model.params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    // Adam: the 1/(w*h) factor in the masked-loss gradient makes fixed-step descent
    // at the default learning rate immeasurably slow, while Adam's
    // per-parameter scaling is invariant to it.
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    TrainResult result;
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < train_idx.size(); b += tc.batch_size) {
            const std::size_t end = std::min(b + tc.batch_size, train_idx.size());
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = b; k < end; ++k) {
                const TrainSample& s = resized[train_idx[k]];
                epoch_loss += model_loss_and_gradient(model, s.image, s.mask,
                                                      tc.mask_area_normalization, grad);
            }
            const double inv_batch = 1.0 / static_cast<double>(end - b);
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < np; ++i) {
                const double gi = grad[i] * inv_batch;
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * gi;
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * gi * gi;
                model.params[i] -= tc.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
            }
        }
        epoch_loss /= static_cast<double>(train_idx.size());

        double val_loss = 0.0;
        for (const std::size_t i : val_idx) {
            const TrainSample& s = resized[i];
            val_loss += masked_loss(s.image, forward_unclamped(model, s.image), s.mask,
                                    tc.mask_area_normalization);
        }
        val_loss /= static_cast<double>(val_idx.size());

        result.metrics.push_back({epoch, epoch_loss, val_loss});
        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = model.params;
        }
    }

    model.params = std::move(best_params);
    model.best_val_loss = best_val;
    model.best_epoch = best_epoch;
    result.model = std::move(model);
    return result;
}

void save_metrics(const std::string& path, const std::vector<EpochMetrics>& metrics) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const EpochMetrics& m : metrics) {
        out << m.epoch << " " << fmt_double(m.train_loss) << " " << fmt_double(m.val_loss) << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ParseError(path, 0, "truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw ParseError(path, 0, "truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in, const std::string& path) {
    const std::uint64_t bits = get_u64(in, path);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

constexpr char kCheckpointMagic[4] = {'T', 'M', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const ReconstructionModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(kCheckpointMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(model.architecture));
    put_u32(out, static_cast<std::uint32_t>(model.bottleneck));
    put_u32(out, static_cast<std::uint32_t>(model.patch_size));
    put_u32(out, static_cast<std::uint32_t>(model.input_width));
    put_u32(out, static_cast<std::uint32_t>(model.input_height));
    put_u32(out, static_cast<std::uint32_t>(model.channels));
    put_u32(out, static_cast<std::uint32_t>(model.best_epoch));
    put_f64(out, model.best_val_loss);
    put_u64(out, model.params.size());
    for (const double v : model.params) put_f64(out, v);
    if (!out) throw DataError("write failed: " + path);
}

ReconstructionModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError(path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw ParseError(path, 0, "not a checkpoint file");
    }
    const std::uint32_t version = get_u32(in, path);
    if (version != kCheckpointVersion) {
        throw ParseError(path, 0, "unsupported checkpoint version " + std::to_string(version));
    }
    ReconstructionModel model;
    const std::uint32_t arch = get_u32(in, path);
    if (arch > 1) throw ParseError(path, 0, "unknown architecture id " + std::to_string(arch));
    model.architecture = static_cast<Architecture>(arch);
    model.bottleneck = static_cast<int>(get_u32(in, path));
    model.patch_size = static_cast<int>(get_u32(in, path));
    model.input_width = static_cast<int>(get_u32(in, path));
    model.input_height = static_cast<int>(get_u32(in, path));
    model.channels = static_cast<int>(get_u32(in, path));
    model.best_epoch = static_cast<int>(get_u32(in, path));
    model.best_val_loss = get_f64(in, path);
    const std::uint64_t count = get_u64(in, path);
    if (model.bottleneck < 1 || model.input_width < 1 || model.input_height < 1 ||
        (model.channels != 1 && model.channels != 3) ||
        (model.architecture == Architecture::PatchLinear &&
         (model.patch_size < 1 || model.input_width % model.patch_size != 0 ||
          model.input_height % model.patch_size != 0))) {
        throw ParseError(path, 0, "inconsistent checkpoint dimensions");
    }
    if (count != parameter_count(model)) {
        throw ParseError(path, 0, "parameter count does not match the recorded dimensions");
    }
    model.params.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) model.params[i] = get_f64(in, path);
    return model;
}

}  // namespace trailmark
