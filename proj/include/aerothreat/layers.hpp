#pragma once

// Tensor kernels for the dual-head network. Feature maps are NHWC, row-major.
// Convolution weights are (k, k, c_in, c_out); dense weights are (in, out).

#include "aerothreat/error.hpp"
#include "aerothreat/numeric_array.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

namespace aerothreat::layers {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct Dims {
    std::size_t n = 0, h = 0, w = 0, c = 0;

    static Dims of(const NumericArray &a) {
        if (a.rank() != 4) throw ValidationError(fmt::format("expected NHWC array, got {}", shape_string(a.shape())));
        return {a.extent(0), a.extent(1), a.extent(2), a.extent(3)};
    }
    [[nodiscard]] Shape shape() const { return {n, h, w, c}; }
    [[nodiscard]] std::size_t pixels() const { return n * h * w; }
};

/// Unfolds k×k same-padded neighbourhoods: row = (n, y, x), column = (ky, kx, c_in).
inline RowMatrix im2col(const NumericArray &in, std::size_t k) {
    const Dims d = Dims::of(in);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    RowMatrix col = RowMatrix::Zero(static_cast<Eigen::Index>(d.pixels()), static_cast<Eigen::Index>(k * k * d.c));
    const double *src = in.data();
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t x = 0; x < d.w; ++x) {
                double *row = col.data() + ((n * d.h + y) * d.w + x) * k * k * d.c;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - pad;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        const double *p = src + ((n * d.h + static_cast<std::size_t>(sy)) * d.w +
                                                 static_cast<std::size_t>(sx)) * d.c;
                        double *q = row + (ky * k + kx) * d.c;
                        for (std::size_t c = 0; c < d.c; ++c) q[c] = p[c];
                    }
                }
            }
        }
    }
    return col;
}

/// Inverse of im2col: scatters (accumulates) column gradients back onto the input grid.
inline NumericArray col2im(const RowMatrix &col, const Dims &d, std::size_t k) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    NumericArray out(d.shape());
    double *dst = out.data();
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t x = 0; x < d.w; ++x) {
                const double *row = col.data() + ((n * d.h + y) * d.w + x) * k * k * d.c;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - pad;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        double *p = dst + ((n * d.h + static_cast<std::size_t>(sy)) * d.w +
                                           static_cast<std::size_t>(sx)) * d.c;
                        const double *q = row + (ky * k + kx) * d.c;
                        for (std::size_t c = 0; c < d.c; ++c) p[c] += q[c];
                    }
                }
            }
        }
    }
    return out;
}

/// Stride-1 same-padded convolution. `col` receives the unfolded input for backward.
inline NumericArray conv2d(const NumericArray &in, const NumericArray &weight, const NumericArray &bias,
                           RowMatrix *col_out = nullptr) {
    const Dims d = Dims::of(in);
    const std::size_t k = weight.extent(0);
    const std::size_t c_out = weight.extent(3);
    if (weight.extent(1) != k || weight.extent(2) != d.c || bias.size() != c_out) {
        throw ValidationError(fmt::format("conv weight {} incompatible with input {}", shape_string(weight.shape()),
                                          shape_string(in.shape())));
    }
    NumericArray out({d.n, d.h, d.w, c_out});
    MatrixMap y(out.data(), static_cast<Eigen::Index>(d.pixels()), static_cast<Eigen::Index>(c_out));
    ConstMatrixMap wm(weight.data(), static_cast<Eigen::Index>(k * k * d.c), static_cast<Eigen::Index>(c_out));
    Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), static_cast<Eigen::Index>(c_out));
    if (k == 1) {
        ConstMatrixMap x(in.data(), static_cast<Eigen::Index>(d.pixels()), static_cast<Eigen::Index>(d.c));
        y.noalias() = x * wm;
        if (col_out) *col_out = x;
    } else {
        RowMatrix col = im2col(in, k);
        y.noalias() = col * wm;
        if (col_out) *col_out = std::move(col);
    }
    y.rowwise() += b;
    return out;
}

/// Gradients of conv2d. Returns d(input) unless `need_input_grad` is false.
inline NumericArray conv2d_backward(const NumericArray &grad_out, const RowMatrix &col, const Dims &in_dims,
                                    const NumericArray &weight, NumericArray &grad_weight, NumericArray &grad_bias,
                                    bool need_input_grad) {
    const std::size_t k = weight.extent(0);
    const std::size_t c_out = weight.extent(3);
    ConstMatrixMap g(grad_out.data(), static_cast<Eigen::Index>(in_dims.pixels()), static_cast<Eigen::Index>(c_out));
    MatrixMap gw(grad_weight.data(), static_cast<Eigen::Index>(k * k * in_dims.c), static_cast<Eigen::Index>(c_out));
    Eigen::Map<Eigen::RowVectorXd> gb(grad_bias.data(), static_cast<Eigen::Index>(c_out));
    gw.noalias() += col.transpose() * g;
    gb += g.colwise().sum();
    if (!need_input_grad) return {};
    ConstMatrixMap wm(weight.data(), static_cast<Eigen::Index>(k * k * in_dims.c), static_cast<Eigen::Index>(c_out));
    RowMatrix dcol = g * wm.transpose();
    if (k == 1) {
        NumericArray out(in_dims.shape());
        MatrixMap(out.data(), dcol.rows(), dcol.cols()) = dcol;
        return out;
    }
    return col2im(dcol, in_dims, k);
}

inline void relu_inplace(NumericArray &a) {
    for (double &v : a.values()) v = v > 0.0 ? v : 0.0;
}

/// Passes gradient where the rectifier output was positive.
inline void relu_backward_inplace(NumericArray &grad, const NumericArray &activated) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(activated[i] > 0.0)) grad[i] = 0.0;
    }
}

inline NumericArray avg_pool2(const NumericArray &in) {
    const Dims d = Dims::of(in);
    if (d.h % 2 != 0 || d.w % 2 != 0) {
        throw ValidationError(fmt::format("2x2 average pool needs even extents, got {}", shape_string(in.shape())));
    }
    NumericArray out({d.n, d.h / 2, d.w / 2, d.c});
    const std::size_t oh = d.h / 2, ow = d.w / 2;
    for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t c = 0; c < d.c; ++c) {
                    auto at = [&](std::size_t yy, std::size_t xx) { return in[((n * d.h + yy) * d.w + xx) * d.c + c]; };
                    out[((n * oh + y) * ow + x) * d.c + c] =
                        0.25 * (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1));
                }
    return out;
}

inline NumericArray avg_pool2_backward(const NumericArray &grad_out, const Dims &in_dims) {
    NumericArray out(in_dims.shape());
    const std::size_t oh = in_dims.h / 2, ow = in_dims.w / 2, C = in_dims.c;
    for (std::size_t n = 0; n < in_dims.n; ++n)
        for (std::size_t y = 0; y < in_dims.h; ++y)
            for (std::size_t x = 0; x < in_dims.w; ++x)
                for (std::size_t c = 0; c < C; ++c)
                    out[((n * in_dims.h + y) * in_dims.w + x) * C + c] =
                        0.25 * grad_out[((n * oh + y / 2) * ow + x / 2) * C + c];
    return out;
}

/// Nearest-neighbour upsampling by an integer factor.
inline NumericArray upsample_nearest(const NumericArray &in, std::size_t factor) {
    const Dims d = Dims::of(in);
    const std::size_t oh = d.h * factor, ow = d.w * factor;
    NumericArray out({d.n, oh, ow, d.c});
    for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                const double *p = in.data() + ((n * d.h + y / factor) * d.w + x / factor) * d.c;
                double *q = out.data() + ((n * oh + y) * ow + x) * d.c;
                for (std::size_t c = 0; c < d.c; ++c) q[c] = p[c];
            }
    return out;
}

inline NumericArray upsample_nearest_backward(const NumericArray &grad_out, const Dims &in_dims, std::size_t factor) {
    NumericArray out(in_dims.shape());
    const std::size_t oh = in_dims.h * factor, ow = in_dims.w * factor, C = in_dims.c;
    for (std::size_t n = 0; n < in_dims.n; ++n)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                const double *p = grad_out.data() + ((n * oh + y) * ow + x) * C;
                double *q = out.data() + ((n * in_dims.h + y / factor) * in_dims.w + x / factor) * C;
                for (std::size_t c = 0; c < C; ++c) q[c] += p[c];
            }
    return out;
}

/// Per-channel spatial mean: (n, h, w, c) -> (n, c).
inline NumericArray global_average_pool(const NumericArray &in) {
    const Dims d = Dims::of(in);
    NumericArray out({d.n, d.c});
    const double inv = 1.0 / static_cast<double>(d.h * d.w);
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t p = 0; p < d.h * d.w; ++p) {
            const double *src = in.data() + (n * d.h * d.w + p) * d.c;
            for (std::size_t c = 0; c < d.c; ++c) out[n * d.c + c] += src[c];
        }
        for (std::size_t c = 0; c < d.c; ++c) out[n * d.c + c] *= inv;
    }
    return out;
}

inline NumericArray global_average_pool_backward(const NumericArray &grad_out, const Dims &in_dims) {
    NumericArray out(in_dims.shape());
    const double inv = 1.0 / static_cast<double>(in_dims.h * in_dims.w);
    for (std::size_t n = 0; n < in_dims.n; ++n)
        for (std::size_t p = 0; p < in_dims.h * in_dims.w; ++p)
            for (std::size_t c = 0; c < in_dims.c; ++c)
                out[(n * in_dims.h * in_dims.w + p) * in_dims.c + c] = grad_out[n * in_dims.c + c] * inv;
    return out;
}

/// (n, in) x (in, out) + bias.
inline NumericArray dense(const NumericArray &in, const NumericArray &weight, const NumericArray &bias) {
    const std::size_t n = in.extent(0), f = in.extent(1), k = weight.extent(1);
    if (weight.extent(0) != f || bias.size() != k) {
        throw ValidationError(fmt::format("dense weight {} incompatible with input {}", shape_string(weight.shape()),
                                          shape_string(in.shape())));
    }
    NumericArray out({n, k});
    MatrixMap y(out.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    y.noalias() = ConstMatrixMap(in.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f)) *
                  ConstMatrixMap(weight.data(), static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k));
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), static_cast<Eigen::Index>(k));
    return out;
}

inline NumericArray dense_backward(const NumericArray &grad_out, const NumericArray &in, const NumericArray &weight,
                                   NumericArray &grad_weight, NumericArray &grad_bias) {
    const auto n = static_cast<Eigen::Index>(in.extent(0));
    const auto f = static_cast<Eigen::Index>(in.extent(1));
    const auto k = static_cast<Eigen::Index>(weight.extent(1));
    ConstMatrixMap g(grad_out.data(), n, k);
    ConstMatrixMap x(in.data(), n, f);
    ConstMatrixMap w(weight.data(), f, k);
    MatrixMap(grad_weight.data(), f, k).noalias() += x.transpose() * g;
    Eigen::Map<Eigen::RowVectorXd>(grad_bias.data(), k) += g.colwise().sum();
    NumericArray out({in.extent(0), in.extent(1)});
    MatrixMap(out.data(), n, f).noalias() = g * w.transpose();
    return out;
}

}  // namespace aerothreat::layers
