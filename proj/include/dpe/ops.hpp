#pragma once

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <utility>
#include <vector>

#include "dpe/autodiff.hpp"
#include "dpe/tensor.hpp"

namespace dpe {

/// c[i] = a[i] + b[i]. Backward passes the gradient unchanged to both inputs.
template <typename S>
Tensor<S> add(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a, b, "add");
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    out.mutable_array() = a.array() + b.array();
    out.ensure_finite("add");
    if (tracing(tape, {&a, &b})) {
        tape->record({a, b}, out, [a, b](Tensor<S> g, Gradients<S>& grads) {
            if (a.requires_grad()) grads.accumulate(a, g);
            if (b.requires_grad()) grads.accumulate(b, g);
        });
    }
    return out;
}

/// Sum over all elements, as a scalar tensor.
template <typename S>
Tensor<S> reduce_sum(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& a) {
    Tensor<S> out = Tensor<S>::scalar(a.array().sum());
    out.ensure_finite("reduce_sum");
    if (tracing(tape, {&a})) {
        tape->record({a}, out, [a](Tensor<S> g, Gradients<S>& grads) {
            grads.accumulate(a, Tensor<S>::full(a.shape(), g.item()));
        });
    }
    return out;
}

/// Arithmetic mean over all elements. Backward distributes 1/N to each element.
template <typename S>
Tensor<S> reduce_mean(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& a) {
    const S inv_n = S(1) / static_cast<S>(a.numel());
    Tensor<S> out = Tensor<S>::scalar(a.array().sum() * inv_n);
    out.ensure_finite("reduce_mean");
    if (tracing(tape, {&a})) {
        tape->record({a}, out, [a, inv_n](Tensor<S> g, Gradients<S>& grads) {
            grads.accumulate(a, Tensor<S>::full(a.shape(), g.item() * inv_n));
        });
    }
    return out;
}

/// y = max(x, 0). Subgradient 0 at x = 0.
template <typename S>
Tensor<S> relu(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    out.mutable_array() = x.array().max(S(0));
    if (tracing(tape, {&x})) {
        tape->record({x}, out, [x](Tensor<S> g, Gradients<S>& grads) {
            Tensor<S> gx = Tensor<S>::zeros(x.shape());
            gx.mutable_array() = (x.array() > S(0)).select(g.array(), S(0));
            grads.accumulate(x, gx);
        });
    }
    return out;
}

/// y = 1 / (1 + exp(-x)). Backward uses y * (1 - y).
template <typename S>
Tensor<S> sigmoid(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    out.mutable_array() = S(1) / (S(1) + (-x.array()).exp());
    out.ensure_finite("sigmoid");
    if (tracing(tape, {&x})) {
        tape->record({x}, out, [x, out](Tensor<S> g, Gradients<S>& grads) {
            Tensor<S> gx = Tensor<S>::zeros(x.shape());
            gx.mutable_array() = g.array() * out.array() * (S(1) - out.array());
            grads.accumulate(x, gx);
        });
    }
    return out;
}

/// 2x2 max pooling with stride 2. H and W must be even. Backward routes each
/// output gradient to the argmax position; ties go to the first position in
/// row-major window order.
template <typename S>
Tensor<S> max_pool2(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x) {
    detail::check_rank4(x, "max_pool2");
    const int64_t n = x.shape().dim(0), c = x.shape().dim(1);
    const int64_t h = x.shape().dim(2), w = x.shape().dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw shape_error("max_pool2: H and W must be even, got shape " + x.shape().to_string());
    }
    const int64_t oh = h / 2, ow = w / 2;
    Tensor<S> out = Tensor<S>::zeros(Shape({n, c, oh, ow}));
    std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));

    const S* xd = x.data().data();
    S* od = out.mutable_data().data();
    int64_t oi = 0;
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const S* plane = xd + (in * c + ic) * h * w;
            for (int64_t y = 0; y < oh; ++y) {
                for (int64_t xcol = 0; xcol < ow; ++xcol, ++oi) {
                    const int64_t base = (2 * y) * w + 2 * xcol;
                    int64_t best = base;
                    S bestv = plane[base];
                    const int64_t cand[3] = {base + 1, base + w, base + w + 1};
                    for (int64_t idx : cand) {
                        if (plane[idx] > bestv) {
                            bestv = plane[idx];
                            best = idx;
                        }
                    }
                    od[oi] = bestv;
                    argmax[static_cast<size_t>(oi)] = (in * c + ic) * h * w + best;
                }
            }
        }
    }
    if (tracing(tape, {&x})) {
        tape->record({x}, out, [x, argmax = std::move(argmax)](Tensor<S> g, Gradients<S>& grads) {
            Tensor<S> gx = Tensor<S>::zeros(x.shape());
            S* gd = gx.mutable_data().data();
            const S* go = g.data().data();
            for (size_t i = 0; i < argmax.size(); ++i) gd[argmax[i]] += go[i];
            grads.accumulate(x, gx);
        });
    }
    return out;
}

/// Depth-wise concatenation: output channels are a's channels then b's.
/// Backward splits the gradient by channel range.
template <typename S>
Tensor<S> concat_channels(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_rank4(a, "concat_channels");
    detail::check_rank4(b, "concat_channels");
    const int64_t n = a.shape().dim(0), h = a.shape().dim(2), w = a.shape().dim(3);
    if (b.shape().dim(0) != n || b.shape().dim(2) != h || b.shape().dim(3) != w) {
        throw shape_error("concat_channels: batch/spatial mismatch " + a.shape().to_string() +
                          " vs " + b.shape().to_string());
    }
    const int64_t ca = a.shape().dim(1), cb = b.shape().dim(1);
    Tensor<S> out = Tensor<S>::zeros(Shape({n, ca + cb, h, w}));
    const int64_t plane = h * w;
    S* od = out.mutable_data().data();
    const S* ad = a.data().data();
    const S* bd = b.data().data();
    for (int64_t in = 0; in < n; ++in) {
        std::copy(ad + in * ca * plane, ad + (in + 1) * ca * plane,
                  od + in * (ca + cb) * plane);
        std::copy(bd + in * cb * plane, bd + (in + 1) * cb * plane,
                  od + (in * (ca + cb) + ca) * plane);
    }
    if (tracing(tape, {&a, &b})) {
        tape->record({a, b}, out, [a, b, n, ca, cb, plane](Tensor<S> g, Gradients<S>& grads) {
            const S* gd = g.data().data();
            if (a.requires_grad()) {
                Tensor<S> ga = Tensor<S>::zeros(a.shape());
                S* p = ga.mutable_data().data();
                for (int64_t in = 0; in < n; ++in) {
                    std::copy(gd + in * (ca + cb) * plane, gd + (in * (ca + cb) + ca) * plane,
                              p + in * ca * plane);
                }
                grads.accumulate(a, ga);
            }
            if (b.requires_grad()) {
                Tensor<S> gb = Tensor<S>::zeros(b.shape());
                S* p = gb.mutable_data().data();
                for (int64_t in = 0; in < n; ++in) {
                    std::copy(gd + (in * (ca + cb) + ca) * plane,
                              gd + (in + 1) * (ca + cb) * plane, p + in * cb * plane);
                }
                grads.accumulate(b, gb);
            }
        });
    }
    return out;
}

/// Mean binary cross-entropy on logits, in the overflow-free form
/// max(z,0) - z*t + log(1 + exp(-|z|)). Differentiable w.r.t. logits only.
template <typename S>
Tensor<S> bce_with_logits(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& logits, const Tensor<S>& targets) {
    detail::check_same_shape(logits, targets, "bce_with_logits");
    if ((targets.array() < S(0)).any() || (targets.array() > S(1)).any()) {
        throw data_error("bce_with_logits: targets must lie in [0, 1]");
    }
    const auto z = logits.array();
    const auto t = targets.array();
    const S inv_n = S(1) / static_cast<S>(logits.numel());
    const S loss = ((z.max(S(0)) - z * t + (-z.abs()).exp().log1p()).sum()) * inv_n;
    Tensor<S> out = Tensor<S>::scalar(loss);
    out.ensure_finite("bce_with_logits");
    if (tracing(tape, {&logits})) {
        tape->record({logits, targets}, out,
                     [logits, targets, inv_n](Tensor<S> g, Gradients<S>& grads) {
                         Tensor<S> gz = Tensor<S>::zeros(logits.shape());
                         gz.mutable_array() =
                             (S(1) / (S(1) + (-logits.array()).exp()) - targets.array()) *
                             (g.item() * inv_n);
                         grads.accumulate(logits, gz);
                     });
    }
    return out;
}

}  // namespace dpe
