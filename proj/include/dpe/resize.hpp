#pragma once

#include <cmath>
#include <cstdint>

#include "dpe/tensor.hpp"

namespace dpe {

/// Corner-aligned bilinear resize of a (C,H,W) image to (C,out_h,out_w).
/// The four image corners map exactly onto the output corners.
template <typename S>
Tensor<S> resize_bilinear(const Tensor<S>& img, int64_t out_h, int64_t out_w) {
    if (img.shape().rank() != 3) {
        throw shape_error("resize_bilinear: expected (C,H,W), got " + img.shape().to_string());
    }
    if (out_h < 1 || out_w < 1) throw shape_error("resize_bilinear: output dims must be >= 1");
    const int64_t c = img.shape().dim(0), h = img.shape().dim(1), w = img.shape().dim(2);
    if (out_h == h && out_w == w) return img;

    Tensor<S> out = Tensor<S>::zeros(Shape({c, out_h, out_w}));
    const double sy = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;
    const S* src = img.data().data();
    S* dst = out.mutable_data().data();
    for (int64_t ic = 0; ic < c; ++ic) {
        const S* plane = src + ic * h * w;
        for (int64_t oy = 0; oy < out_h; ++oy) {
            const double fy = oy * sy;
            const int64_t y0 = static_cast<int64_t>(fy);
            const int64_t y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - y0;
            for (int64_t ox = 0; ox < out_w; ++ox) {
                const double fx = ox * sx;
                const int64_t x0 = static_cast<int64_t>(fx);
                const int64_t x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - x0;
                const double top = (1.0 - wx) * plane[y0 * w + x0] + wx * plane[y0 * w + x1];
                const double bot = (1.0 - wx) * plane[y1 * w + x0] + wx * plane[y1 * w + x1];
                dst[(ic * out_h + oy) * out_w + ox] = static_cast<S>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

/// Nearest-neighbor resize, used for masks so values stay binary.
template <typename S>
Tensor<S> resize_nearest(const Tensor<S>& img, int64_t out_h, int64_t out_w) {
    if (img.shape().rank() != 3) {
        throw shape_error("resize_nearest: expected (C,H,W), got " + img.shape().to_string());
    }
    if (out_h < 1 || out_w < 1) throw shape_error("resize_nearest: output dims must be >= 1");
    const int64_t c = img.shape().dim(0), h = img.shape().dim(1), w = img.shape().dim(2);
    if (out_h == h && out_w == w) return img;

    Tensor<S> out = Tensor<S>::zeros(Shape({c, out_h, out_w}));
    const double sy = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;
    const S* src = img.data().data();
    S* dst = out.mutable_data().data();
    for (int64_t ic = 0; ic < c; ++ic) {
        for (int64_t oy = 0; oy < out_h; ++oy) {
            const int64_t y = static_cast<int64_t>(std::lround(oy * sy));
            for (int64_t ox = 0; ox < out_w; ++ox) {
                const int64_t x = static_cast<int64_t>(std::lround(ox * sx));
                dst[(ic * out_h + oy) * out_w + ox] = src[(ic * h + y) * w + x];
            }
        }
    }
    return out;
}

}  // namespace dpe
