#pragma once

#include <cstdint>
#include <optional>
#include <type_traits>

#include "dpe/batchnorm.hpp"
#include "dpe/conv.hpp"
#include "dpe/ops.hpp"

namespace dpe {

/// Residual unit with two convolutions on the main path (1x1 for channel
/// adjustment, then 3x3 for spatial mixing) and a projected shortcut. The
/// 1x1 + BN projection exists exactly when the input and output channel
/// counts differ; otherwise the shortcut is the identity.
template <typename S>
struct DualBlock {
    int64_t in_ch = 0;
    int64_t out_ch = 0;
    ConvParams<S> conv_a;  // 1x1, in_ch -> out_ch
    BatchNormParams<S> bn_a;
    ConvParams<S> conv_b;  // 3x3, out_ch -> out_ch
    BatchNormParams<S> bn_b;
    struct Projection {
        ConvParams<S> conv;  // 1x1, in_ch -> out_ch
        BatchNormParams<S> bn;
    };
    std::optional<Projection> shortcut;
};

/// Residual unit with a single 3x3 convolution and an identity shortcut,
/// which requires equal input and output channel counts.
template <typename S>
struct SingleBlock {
    int64_t channels = 0;
    ConvParams<S> conv;  // 3x3, channels -> channels
    BatchNormParams<S> bn;
};

template <typename S>
DualBlock<S> make_dual_block(SeededRng& rng, int64_t in_ch, int64_t out_ch) {
    DualBlock<S> b;
    b.in_ch = in_ch;
    b.out_ch = out_ch;
    b.conv_a = make_conv<S>(rng, out_ch, in_ch, 1);
    b.bn_a = make_batch_norm<S>(out_ch);
    b.conv_b = make_conv<S>(rng, out_ch, out_ch, 3);
    b.bn_b = make_batch_norm<S>(out_ch);
    if (in_ch != out_ch) {
        typename DualBlock<S>::Projection proj;
        proj.conv = make_conv<S>(rng, out_ch, in_ch, 1);
        proj.bn = make_batch_norm<S>(out_ch);
        b.shortcut = std::move(proj);
    }
    return b;
}

template <typename S>
SingleBlock<S> make_single_block(SeededRng& rng, int64_t channels) {
    SingleBlock<S> b;
    b.channels = channels;
    b.conv = make_conv<S>(rng, channels, channels, 3);
    b.bn = make_batch_norm<S>(channels);
    return b;
}

/// Main path BN_b(conv3x3(ReLU(BN_a(conv1x1(x))))), added to the (possibly
/// projected) shortcut, then a final ReLU.
template <typename S>
Tensor<S> dual_block_forward(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x, DualBlock<S>& b, bool training) {
    if (x.shape().rank() != 4 || x.shape().dim(1) != b.in_ch) {
        throw shape_error("dual_block_forward: input " + x.shape().to_string() +
                          " does not provide " + std::to_string(b.in_ch) + " channels");
    }
    Tensor<S> main = conv2d(tape, x, b.conv_a);
    main = batch_norm(tape, main, b.bn_a, training);
    main = relu(tape, main);
    main = conv2d(tape, main, b.conv_b);
    main = batch_norm(tape, main, b.bn_b, training);
    Tensor<S> skip = x;
    if (b.shortcut) {
        skip = conv2d(tape, x, b.shortcut->conv);
        skip = batch_norm(tape, skip, b.shortcut->bn, training);
    }
    return relu(tape, add(tape, main, skip));
}

/// ReLU(BN(conv3x3(x)) + x); identity skip, shape preserved.
template <typename S>
Tensor<S> single_block_forward(Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x, SingleBlock<S>& b,
                               bool training) {
    if (x.shape().rank() != 4 || x.shape().dim(1) != b.channels) {
        throw shape_error("single_block_forward: input " + x.shape().to_string() +
                          " does not provide " + std::to_string(b.channels) + " channels");
    }
    Tensor<S> main = conv2d(tape, x, b.conv);
    main = batch_norm(tape, main, b.bn, training);
    return relu(tape, add(tape, main, x));
}

// Trainable scalar counts; BN running statistics are buffers, not parameters.
template <typename S>
int64_t param_count(const ConvParams<S>& p) {
    return p.weight.numel() + p.bias.numel();
}

template <typename S>
int64_t param_count(const BatchNormParams<S>& p) {
    return p.gamma.numel() + p.beta.numel();
}

template <typename S>
int64_t param_count_block(const DualBlock<S>& b) {
    int64_t n = param_count(b.conv_a) + param_count(b.bn_a) + param_count(b.conv_b) +
                param_count(b.bn_b);
    if (b.shortcut) n += param_count(b.shortcut->conv) + param_count(b.shortcut->bn);
    return n;
}

template <typename S>
int64_t param_count_block(const SingleBlock<S>& b) {
    return param_count(b.conv) + param_count(b.bn);
}

}  // namespace dpe
