#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "dpe/autodiff.hpp"
#include "dpe/ops.hpp"
#include "dpe/rng.hpp"
#include "dpe/tensor.hpp"

namespace dpe {

/// Convolution parameters. Standard convolutions store the weight as
/// (out_ch, in_ch, kH, kW) and run at stride 1 with "same" zero padding.
/// Transposed convolutions reuse the same struct with the weight read as
/// (in_ch, out_ch, 2, 2) at stride 2, so that conv_transpose2d is exactly
/// the linear adjoint of a stride-2 2x2 convolution with the same buffer.
template <typename S>
struct ConvParams {
    Tensor<S> weight;
    Tensor<S> bias;
};

/// Kaiming fan-in init: weights ~ N(0, 2/fan_in), bias zero.
template <typename S>
ConvParams<S> make_conv(SeededRng& rng, int64_t out_ch, int64_t in_ch, int64_t k) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in_ch * k * k));
    std::vector<S> w(static_cast<size_t>(out_ch * in_ch * k * k));
    for (auto& v : w) v = static_cast<S>(rng.normal() * std_dev);
    ConvParams<S> p;
    p.weight = Tensor<S>::from_values(Shape({out_ch, in_ch, k, k}), std::move(w));
    p.weight.set_requires_grad(true);
    p.bias = Tensor<S>::zeros(Shape({out_ch}));
    p.bias.set_requires_grad(true);
    return p;
}

/// Transposed-conv parameters, weight laid out (in_ch, out_ch, 2, 2).
template <typename S>
ConvParams<S> make_conv_transpose(SeededRng& rng, int64_t in_ch, int64_t out_ch) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in_ch * 2 * 2));
    std::vector<S> w(static_cast<size_t>(in_ch * out_ch * 4));
    for (auto& v : w) v = static_cast<S>(rng.normal() * std_dev);
    ConvParams<S> p;
    p.weight = Tensor<S>::from_values(Shape({in_ch, out_ch, 2, 2}), std::move(w));
    p.weight.set_requires_grad(true);
    p.bias = Tensor<S>::zeros(Shape({out_ch}));
    p.bias.set_requires_grad(true);
    return p;
}

namespace detail {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowMatMap = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstRowMatMap = Eigen::Map<const RowMat<S>>;
template <typename S>
using ColVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Gathers 3x3 same-padded patches of one image into a (C*9, H*W) row-major
/// matrix; row (c,di,dj) holds x[c, h+di-1, w+dj-1] over output pixels.
template <typename S>
void im2col3(const S* img, int64_t c, int64_t h, int64_t w, S* cols) {
    const int64_t hw = h * w;
    for (int64_t ic = 0; ic < c; ++ic) {
        const S* plane = img + ic * hw;
        for (int64_t di = 0; di < 3; ++di) {
            for (int64_t dj = 0; dj < 3; ++dj) {
                S* row = cols + ((ic * 3 + di) * 3 + dj) * hw;
                const int64_t shift = dj - 1;
                const int64_t dst0 = std::max<int64_t>(0, -shift);
                const int64_t len = w - std::abs(shift);
                for (int64_t oh = 0; oh < h; ++oh) {
                    S* dst = row + oh * w;
                    const int64_t ih = oh + di - 1;
                    if (ih < 0 || ih >= h) {
                        std::fill(dst, dst + w, S(0));
                        continue;
                    }
                    if (shift != 0) std::fill(dst, dst + w, S(0));
                    const S* src = plane + ih * w + std::max<int64_t>(0, shift);
                    std::copy(src, src + len, dst + dst0);
                }
            }
        }
    }
}

/// Adjoint of im2col3: scatter-adds a (C*9, H*W) matrix back onto an image.
template <typename S>
void col2im3(const S* cols, int64_t c, int64_t h, int64_t w, S* img) {
    const int64_t hw = h * w;
    for (int64_t ic = 0; ic < c; ++ic) {
        S* plane = img + ic * hw;
        for (int64_t di = 0; di < 3; ++di) {
            for (int64_t dj = 0; dj < 3; ++dj) {
                const S* row = cols + ((ic * 3 + di) * 3 + dj) * hw;
                const int64_t shift = dj - 1;
                const int64_t dst0 = std::max<int64_t>(0, -shift);
                const int64_t len = w - std::abs(shift);
                for (int64_t oh = 0; oh < h; ++oh) {
                    const int64_t ih = oh + di - 1;
                    if (ih < 0 || ih >= h) continue;
                    S* dst = plane + ih * w + std::max<int64_t>(0, shift);
                    const S* src = row + oh * w + dst0;
                    for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
                }
            }
        }
    }
}

template <typename S>
void check_conv_inputs(const Tensor<S>& x, const ConvParams<S>& p, const char* op) {
    dpe::detail::check_rank4(x, op);
    if (p.weight.shape().rank() != 4) {
        throw shape_error(std::string(op) + ": weight must be rank 4, got " +
                          p.weight.shape().to_string());
    }
}

}  // namespace detail

/// 2D convolution, kernel 1x1 or 3x3, stride 1, "same" zero padding, so the
/// output keeps the input H and W. Differentiable w.r.t. x, weight and bias.
template <typename S>
Tensor<S> conv2d(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x, const ConvParams<S>& p) {
    detail::check_conv_inputs(x, p, "conv2d");
    const int64_t out_ch = p.weight.shape().dim(0), in_ch = p.weight.shape().dim(1);
    const int64_t k = p.weight.shape().dim(2);
    if (k != p.weight.shape().dim(3) || (k != 1 && k != 3)) {
        throw shape_error("conv2d: kernel must be 1x1 or 3x3, got weight " +
                          p.weight.shape().to_string());
    }
    if (x.shape().dim(1) != in_ch) {
        throw shape_error("conv2d: input has " + std::to_string(x.shape().dim(1)) +
                          " channels, weight expects " + std::to_string(in_ch));
    }
    if (p.bias.shape() != Shape({out_ch})) {
        throw shape_error("conv2d: bias shape " + p.bias.shape().to_string() +
                          " does not match out_ch " + std::to_string(out_ch));
    }
    const int64_t n = x.shape().dim(0), h = x.shape().dim(2), w = x.shape().dim(3);
    const int64_t hw = h * w, ckk = in_ch * k * k;

    Tensor<S> out = Tensor<S>::zeros(Shape({n, out_ch, h, w}));
    detail::ConstRowMatMap<S> wm(p.weight.data().data(), out_ch, ckk);
    Eigen::Map<const detail::ColVec<S>> bias(p.bias.data().data(), out_ch);

    std::vector<S> cols(k == 3 ? static_cast<size_t>(ckk * hw) : 0);
    for (int64_t in = 0; in < n; ++in) {
        const S* img = x.data().data() + in * in_ch * hw;
        detail::RowMatMap<S> ym(out.mutable_data().data() + in * out_ch * hw, out_ch, hw);
        if (k == 1) {
            detail::ConstRowMatMap<S> xm(img, in_ch, hw);
            ym.noalias() = wm * xm;
        } else {
            detail::im2col3(img, in_ch, h, w, cols.data());
            detail::ConstRowMatMap<S> cm(cols.data(), ckk, hw);
            ym.noalias() = wm * cm;
        }
        ym.colwise() += bias;
    }
    out.ensure_finite("conv2d");

    if (tracing(tape, {&x, &p.weight, &p.bias})) {
        Tensor<S> weight = p.weight, b = p.bias;
        tape->record(
            {x, weight, b}, out,
            [x, weight, b, n, in_ch, out_ch, h, w, k](Tensor<S> g, Gradients<S>& grads) {
                const int64_t hw = h * w, ckk = in_ch * k * k;
                detail::ConstRowMatMap<S> wm(weight.data().data(), out_ch, ckk);
                Tensor<S> gw = Tensor<S>::zeros(weight.shape());
                Tensor<S> gb = Tensor<S>::zeros(b.shape());
                Tensor<S> gx = Tensor<S>::zeros(x.shape());
                detail::RowMatMap<S> gwm(gw.mutable_data().data(), out_ch, ckk);
                Eigen::Map<detail::ColVec<S>> gbv(gb.mutable_data().data(), out_ch);
                const bool need_gx = x.requires_grad();

                std::vector<S> cols(k == 3 ? static_cast<size_t>(ckk * hw) : 0);
                std::vector<S> gcols(k == 3 && need_gx ? static_cast<size_t>(ckk * hw) : 0);
                for (int64_t in = 0; in < n; ++in) {
                    const S* img = x.data().data() + in * in_ch * hw;
                    detail::ConstRowMatMap<S> gy(g.data().data() + in * out_ch * hw, out_ch, hw);
                    gbv += gy.rowwise().sum();
                    if (k == 1) {
                        detail::ConstRowMatMap<S> xm(img, in_ch, hw);
                        gwm.noalias() += gy * xm.transpose();
                        if (need_gx) {
                            detail::RowMatMap<S> gxm(gx.mutable_data().data() + in * in_ch * hw,
                                                     in_ch, hw);
                            gxm.noalias() += wm.transpose() * gy;
                        }
                    } else {
                        detail::im2col3(img, in_ch, h, w, cols.data());
                        detail::ConstRowMatMap<S> cm(cols.data(), ckk, hw);
                        gwm.noalias() += gy * cm.transpose();
                        if (need_gx) {
                            detail::RowMatMap<S> gcm(gcols.data(), ckk, hw);
                            gcm.noalias() = wm.transpose() * gy;
                            detail::col2im3(gcols.data(), in_ch, h, w,
                                            gx.mutable_data().data() + in * in_ch * hw);
                        }
                    }
                }
                if (need_gx) grads.accumulate(x, gx);
                if (weight.requires_grad()) grads.accumulate(weight, gw);
                if (b.requires_grad()) grads.accumulate(b, gb);
            });
    }
    return out;
}

/// Transposed convolution, kernel 2x2, stride 2: output H and W are exactly
/// twice the input's. With the weight read as (in_ch, out_ch, 2, 2) this is
/// the linear adjoint of a stride-2 2x2 valid convolution that shares the
/// same weight buffer. Differentiable w.r.t. x, weight and bias.
template <typename S>
Tensor<S> conv_transpose2d(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x, const ConvParams<S>& p) {
    detail::check_conv_inputs(x, p, "conv_transpose2d");
    const int64_t in_ch = p.weight.shape().dim(0), out_ch = p.weight.shape().dim(1);
    if (p.weight.shape().dim(2) != 2 || p.weight.shape().dim(3) != 2) {
        throw shape_error("conv_transpose2d: kernel must be 2x2, got weight " +
                          p.weight.shape().to_string());
    }
    if (x.shape().dim(1) != in_ch) {
        throw shape_error("conv_transpose2d: input has " + std::to_string(x.shape().dim(1)) +
                          " channels, weight expects " + std::to_string(in_ch));
    }
    if (p.bias.shape() != Shape({out_ch})) {
        throw shape_error("conv_transpose2d: bias shape " + p.bias.shape().to_string() +
                          " does not match out_ch " + std::to_string(out_ch));
    }
    const int64_t n = x.shape().dim(0), h = x.shape().dim(2), w = x.shape().dim(3);
    const int64_t hw = h * w, oh = 2 * h, ow = 2 * w;

    Tensor<S> out = Tensor<S>::zeros(Shape({n, out_ch, oh, ow}));
    const S* wd = p.weight.data().data();
    const S* bd = p.bias.data().data();

    // W_ij is the (in_ch, out_ch) slice of the weight at kernel tap (i, j).
    using StridedMap =
        Eigen::Map<const detail::RowMat<S>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
    detail::RowMat<S> z(out_ch, hw);
    for (int64_t in = 0; in < n; ++in) {
        detail::ConstRowMatMap<S> xm(x.data().data() + in * in_ch * hw, in_ch, hw);
        S* yimg = out.mutable_data().data() + in * out_ch * oh * ow;
        for (int64_t i = 0; i < 2; ++i) {
            for (int64_t j = 0; j < 2; ++j) {
                StridedMap wij(wd + 2 * i + j, in_ch, out_ch,
                               Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(out_ch * 4, 4));
                z.noalias() = wij.transpose() * xm;
                for (int64_t co = 0; co < out_ch; ++co) {
                    const S* zrow = z.data() + co * hw;
                    S* plane = yimg + co * oh * ow;
                    for (int64_t y = 0; y < h; ++y) {
                        S* dst = plane + (2 * y + i) * ow + j;
                        const S* src = zrow + y * w;
                        for (int64_t xc = 0; xc < w; ++xc) dst[2 * xc] = src[xc] + bd[co];
                    }
                }
            }
        }
    }
    out.ensure_finite("conv_transpose2d");

    if (tracing(tape, {&x, &p.weight, &p.bias})) {
        Tensor<S> weight = p.weight, b = p.bias;
        tape->record(
            {x, weight, b}, out,
            [x, weight, b, n, in_ch, out_ch, h, w](Tensor<S> g, Gradients<S>& grads) {
                const int64_t hw = h * w, oh = 2 * h, ow = 2 * w;
                Tensor<S> gw = Tensor<S>::zeros(weight.shape());
                Tensor<S> gb = Tensor<S>::zeros(b.shape());
                Tensor<S> gx = Tensor<S>::zeros(x.shape());
                const bool need_gx = x.requires_grad();
                const S* wd = weight.data().data();

                using StridedCMap = Eigen::Map<const detail::RowMat<S>, 0,
                                               Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
                using StridedMMap = Eigen::Map<detail::RowMat<S>, 0,
                                               Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
                detail::RowMat<S> gz(out_ch, hw);
                for (int64_t in = 0; in < n; ++in) {
                    const S* gimg = g.data().data() + in * out_ch * oh * ow;
                    detail::ConstRowMatMap<S> xm(x.data().data() + in * in_ch * hw, in_ch, hw);
                    for (int64_t co = 0; co < out_ch; ++co) {
                        gb.mutable_data()[co] +=
                            ConstArrayMap<S>(gimg + co * oh * ow, oh * ow).sum();
                    }
                    for (int64_t i = 0; i < 2; ++i) {
                        for (int64_t j = 0; j < 2; ++j) {
                            // Gather the stride-2 slice of the output gradient.
                            for (int64_t co = 0; co < out_ch; ++co) {
                                const S* plane = gimg + co * oh * ow;
                                S* dst = gz.data() + co * hw;
                                for (int64_t y = 0; y < h; ++y) {
                                    const S* src = plane + (2 * y + i) * ow + j;
                                    for (int64_t xc = 0; xc < w; ++xc) dst[y * w + xc] = src[2 * xc];
                                }
                            }
                            StridedMMap gwij(gw.mutable_data().data() + 2 * i + j, in_ch, out_ch,
                                             Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(
                                                 out_ch * 4, 4));
                            gwij.noalias() += xm * gz.transpose();
                            if (need_gx) {
                                StridedCMap wij(wd + 2 * i + j, in_ch, out_ch,
                                                Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(
                                                    out_ch * 4, 4));
                                detail::RowMatMap<S> gxm(
                                    gx.mutable_data().data() + in * in_ch * hw, in_ch, hw);
                                gxm.noalias() += wij * gz;
                            }
                        }
                    }
                }
                if (need_gx) grads.accumulate(x, gx);
                if (weight.requires_grad()) grads.accumulate(weight, gw);
                if (b.requires_grad()) grads.accumulate(b, gb);
            });
    }
    return out;
}

}  // namespace dpe
