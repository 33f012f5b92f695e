#pragma once

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "dpe/autodiff.hpp"
#include "dpe/tensor.hpp"

namespace dpe {

template <typename S>
struct BatchNormParams {
    Tensor<S> gamma;
    Tensor<S> beta;
    Tensor<S> running_mean;
    Tensor<S> running_var;
    S momentum = S(0.1);
    S eps = S(1e-5);
};

template <typename S>
BatchNormParams<S> make_batch_norm(int64_t channels) {
    BatchNormParams<S> p;
    p.gamma = Tensor<S>::ones(Shape({channels}));
    p.gamma.set_requires_grad(true);
    p.beta = Tensor<S>::zeros(Shape({channels}));
    p.beta.set_requires_grad(true);
    p.running_mean = Tensor<S>::zeros(Shape({channels}));
    p.running_var = Tensor<S>::ones(Shape({channels}));
    return p;
}

/// Batch normalization over (N, H, W) per channel.
///
/// Training mode normalizes with the batch mean and biased batch variance and
/// updates the running statistics in place as
/// running <- (1 - momentum) * running + momentum * batch; it therefore must
/// not run concurrently on the same parameter object. Eval mode uses only the
/// running statistics. Differentiable w.r.t. x, gamma, beta in both modes.
template <typename S>
Tensor<S> batch_norm(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x, BatchNormParams<S>& p, bool training) {
    detail::check_rank4(x, "batch_norm");
    const int64_t n = x.shape().dim(0), c = x.shape().dim(1);
    const int64_t h = x.shape().dim(2), w = x.shape().dim(3);
    if (p.gamma.shape() != Shape({c})) {
        throw shape_error("batch_norm: input has " + std::to_string(c) +
                          " channels, params expect " + p.gamma.shape().to_string());
    }
    const int64_t hw = h * w;
    const int64_t m = n * hw;  // elements per channel

    std::vector<S> mean(static_cast<size_t>(c)), inv_std(static_cast<size_t>(c));
    if (training) {
        for (int64_t ic = 0; ic < c; ++ic) {
            S sum = 0;
            for (int64_t in = 0; in < n; ++in) {
                sum += ConstArrayMap<S>(x.data().data() + (in * c + ic) * hw, hw).sum();
            }
            const S mu = sum / static_cast<S>(m);
            S ss = 0;
            for (int64_t in = 0; in < n; ++in) {
                ss += (ConstArrayMap<S>(x.data().data() + (in * c + ic) * hw, hw) - mu)
                          .square()
                          .sum();
            }
            const S var = ss / static_cast<S>(m);
            mean[static_cast<size_t>(ic)] = mu;
            inv_std[static_cast<size_t>(ic)] = S(1) / std::sqrt(var + p.eps);
            p.running_mean.mutable_data()[ic] =
                (S(1) - p.momentum) * p.running_mean.data()[ic] + p.momentum * mu;
            p.running_var.mutable_data()[ic] =
                (S(1) - p.momentum) * p.running_var.data()[ic] + p.momentum * var;
        }
    } else {
        for (int64_t ic = 0; ic < c; ++ic) {
            mean[static_cast<size_t>(ic)] = p.running_mean.data()[ic];
            inv_std[static_cast<size_t>(ic)] =
                S(1) / std::sqrt(p.running_var.data()[ic] + p.eps);
        }
    }

    Tensor<S> out = Tensor<S>::zeros(x.shape());
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const S scale = p.gamma.data()[ic] * inv_std[static_cast<size_t>(ic)];
            const S shift = p.beta.data()[ic] - mean[static_cast<size_t>(ic)] * scale;
            ArrayMap<S>(out.mutable_data().data() + (in * c + ic) * hw, hw) =
                ConstArrayMap<S>(x.data().data() + (in * c + ic) * hw, hw) * scale + shift;
        }
    }
    out.ensure_finite("batch_norm");

    if (tracing(tape, {&x, &p.gamma, &p.beta})) {
        Tensor<S> gamma = p.gamma, beta = p.beta;
        tape->record(
            {x, gamma, beta}, out,
            [x, gamma, beta, mean = std::move(mean), inv_std = std::move(inv_std), n, c, hw, m,
             training](Tensor<S> g, Gradients<S>& grads) {
                Tensor<S> gg = Tensor<S>::zeros(gamma.shape());
                Tensor<S> gb = Tensor<S>::zeros(beta.shape());
                Tensor<S> gx = Tensor<S>::zeros(x.shape());
                const bool need_gx = x.requires_grad();
                for (int64_t ic = 0; ic < c; ++ic) {
                    const S mu = mean[static_cast<size_t>(ic)];
                    const S is = inv_std[static_cast<size_t>(ic)];
                    S sum_g = 0, sum_gxhat = 0;
                    for (int64_t in = 0; in < n; ++in) {
                        ConstArrayMap<S> gm(g.data().data() + (in * c + ic) * hw, hw);
                        ConstArrayMap<S> xm(x.data().data() + (in * c + ic) * hw, hw);
                        sum_g += gm.sum();
                        sum_gxhat += (gm * (xm - mu) * is).sum();
                    }
                    gb.mutable_data()[ic] = sum_g;
                    gg.mutable_data()[ic] = sum_gxhat;
                    if (!need_gx) continue;
                    const S gam = gamma.data()[ic];
                    if (training) {
                        // dx = gamma * inv_std * (g - mean(g) - xhat * mean(g * xhat))
                        const S mg = sum_g / static_cast<S>(m);
                        const S mgx = sum_gxhat / static_cast<S>(m);
                        for (int64_t in = 0; in < n; ++in) {
                            ConstArrayMap<S> gm(g.data().data() + (in * c + ic) * hw, hw);
                            ConstArrayMap<S> xm(x.data().data() + (in * c + ic) * hw, hw);
                            ArrayMap<S>(gx.mutable_data().data() + (in * c + ic) * hw, hw) =
                                gam * is * (gm - mg - (xm - mu) * is * mgx);
                        }
                    } else {
                        // Running statistics are constants: a plain affine map.
                        for (int64_t in = 0; in < n; ++in) {
                            ConstArrayMap<S> gm(g.data().data() + (in * c + ic) * hw, hw);
                            ArrayMap<S>(gx.mutable_data().data() + (in * c + ic) * hw, hw) =
                                gm * gam * is;
                        }
                    }
                }
                if (need_gx) grads.accumulate(x, gx);
                if (gamma.requires_grad()) grads.accumulate(gamma, gg);
                if (beta.requires_grad()) grads.accumulate(beta, gb);
            });
    }
    return out;
}

}  // namespace dpe
