#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "dpe/blocks.hpp"

namespace dpe {

/// Which encoder branches a network instance carries. `both` is the full
/// dual-parallel network; the reduced variants are the ablation rows
/// Network 1 (dual only) and Network 2 (single only).
enum class NetVariant { dual_only, single_only, both };

inline const char* to_string(NetVariant v) {
    switch (v) {
        case NetVariant::dual_only: return "dual_only";
        case NetVariant::single_only: return "single_only";
        case NetVariant::both: return "both";
    }
    return "both";
}

inline NetVariant parse_variant(const std::string& s) {
    if (s == "dual_only") return NetVariant::dual_only;
    if (s == "single_only") return NetVariant::single_only;
    if (s == "both") return NetVariant::both;
    throw config_error("unknown variant '" + s + "' (expected dual_only|single_only|both)");
}

struct NetConfig {
    NetVariant variant = NetVariant::both;
    std::vector<int64_t> stage_widths = {16, 32, 64, 128};
    int64_t blocks_per_stage = 1;
    int64_t input_channels = 3;
    int64_t input_h = 288;
    int64_t input_w = 384;

    int64_t num_stages() const { return static_cast<int64_t>(stage_widths.size()); }

    /// Channel count entering the decoder: both branch widths fused, or one.
    int64_t bottleneck_channels() const {
        const int64_t last = stage_widths.back();
        return variant == NetVariant::both ? 2 * last : last;
    }

    void validate() const {
        if (stage_widths.empty()) throw config_error("stage_widths must not be empty");
        for (int64_t w : stage_widths) {
            if (w < 1) throw config_error("stage widths must be >= 1");
        }
        if (blocks_per_stage < 1) throw config_error("blocks_per_stage must be >= 1");
        if (input_channels < 1) throw config_error("input_channels must be >= 1");
        const int64_t factor = int64_t(1) << num_stages();
        if (input_h < factor || input_w < factor || input_h % factor != 0 ||
            input_w % factor != 0) {
            throw config_error("input " + std::to_string(input_h) + "x" +
                               std::to_string(input_w) + " must be divisible by 2^" +
                               std::to_string(num_stages()) + " = " + std::to_string(factor));
        }
        int64_t d = bottleneck_channels();
        for (int64_t i = 0; i < num_stages(); ++i) {
            if (d % 2 != 0) {
                throw config_error("decoder cannot halve odd channel count " +
                                   std::to_string(d) + "; adjust stage_widths");
            }
            d /= 2;
        }
    }
};

template <typename S>
struct Network {
    struct DualStage {
        std::vector<DualBlock<S>> blocks;
    };
    struct SingleStage {
        ConvParams<S> lift;  // non-residual 3x3 width change
        BatchNormParams<S> lift_bn;
        std::vector<SingleBlock<S>> blocks;
    };
    struct DecoderStage {
        ConvParams<S> up;  // transposed 2x2/2, halves channels, doubles H,W
        ConvParams<S> conv;
        BatchNormParams<S> bn;
    };

    NetConfig cfg;
    uint64_t seed = 0;
    std::vector<DualStage> dual_stages;
    std::vector<SingleStage> single_stages;
    std::vector<DecoderStage> decoder;
    ConvParams<S> head;  // 1x1 -> 1 logit channel, bias, no BN
};

/// Builds a network with Kaiming-initialized convolutions drawn from the
/// seed in a fixed traversal order, so identical (cfg, seed) pairs produce
/// bit-identical parameters.
template <typename S>
Network<S> build_network(const NetConfig& cfg, uint64_t seed) {
    cfg.validate();
    Network<S> net;
    net.cfg = cfg;
    net.seed = seed;
    SeededRng rng(seed);

    if (cfg.variant != NetVariant::single_only) {
        int64_t prev = cfg.input_channels;
        for (int64_t w : cfg.stage_widths) {
            typename Network<S>::DualStage stage;
            stage.blocks.push_back(make_dual_block<S>(rng, prev, w));
            for (int64_t b = 1; b < cfg.blocks_per_stage; ++b) {
                stage.blocks.push_back(make_dual_block<S>(rng, w, w));
            }
            net.dual_stages.push_back(std::move(stage));
            prev = w;
        }
    }
    if (cfg.variant != NetVariant::dual_only) {
        int64_t prev = cfg.input_channels;
        for (int64_t w : cfg.stage_widths) {
            typename Network<S>::SingleStage stage;
            stage.lift = make_conv<S>(rng, w, prev, 3);
            stage.lift_bn = make_batch_norm<S>(w);
            for (int64_t b = 0; b < cfg.blocks_per_stage; ++b) {
                stage.blocks.push_back(make_single_block<S>(rng, w));
            }
            net.single_stages.push_back(std::move(stage));
            prev = w;
        }
    }
    int64_t d = cfg.bottleneck_channels();
    for (int64_t i = 0; i < cfg.num_stages(); ++i) {
        typename Network<S>::DecoderStage stage;
        stage.up = make_conv_transpose<S>(rng, d, d / 2);
        stage.conv = make_conv<S>(rng, d / 2, d / 2, 3);
        stage.bn = make_batch_norm<S>(d / 2);
        net.decoder.push_back(std::move(stage));
        d /= 2;
    }
    net.head = make_conv<S>(rng, 1, d, 1);
    return net;
}

/// Full forward pass to per-pixel logits at the input resolution. Any H,W
/// divisible by 2^num_stages is accepted, not just the configured default.
/// Training mode updates BN running statistics in place.
template <typename S>
Tensor<S> forward(Network<S>& net, Tape<std::type_identity_t<S>>* tape, const Tensor<S>& x, bool training) {
    detail::check_rank4(x, "forward");
    if (x.shape().dim(1) != net.cfg.input_channels) {
        throw shape_error("forward: input has " + std::to_string(x.shape().dim(1)) +
                          " channels, network expects " +
                          std::to_string(net.cfg.input_channels));
    }
    const int64_t factor = int64_t(1) << net.cfg.num_stages();
    if (x.shape().dim(2) % factor != 0 || x.shape().dim(3) % factor != 0) {
        throw shape_error("forward: input H,W " + x.shape().to_string() +
                          " must be divisible by " + std::to_string(factor));
    }

    Tensor<S> fused;
    if (net.cfg.variant != NetVariant::single_only) {
        Tensor<S> d = x;
        for (auto& stage : net.dual_stages) {
            for (auto& block : stage.blocks) d = dual_block_forward(tape, d, block, training);
            d = max_pool2(tape, d);
        }
        fused = d;
    }
    if (net.cfg.variant != NetVariant::dual_only) {
        Tensor<S> s = x;
        for (auto& stage : net.single_stages) {
            s = relu(tape, batch_norm(tape, conv2d(tape, s, stage.lift), stage.lift_bn, training));
            for (auto& block : stage.blocks) s = single_block_forward(tape, s, block, training);
            s = max_pool2(tape, s);
        }
        fused = net.cfg.variant == NetVariant::both ? concat_channels(tape, fused, s) : s;
    }

    Tensor<S> z = fused;
    for (auto& stage : net.decoder) {
        z = conv_transpose2d(tape, z, stage.up);
        z = relu(tape, batch_norm(tape, conv2d(tape, z, stage.conv), stage.bn, training));
    }
    return conv2d(tape, z, net.head);
}

/// A named tensor slot inside a network. Trainable slots are optimizer
/// targets; the rest are BN running statistics.
template <typename S>
struct NamedTensor {
    std::string name;
    Tensor<S>* tensor;
    bool trainable;
};

namespace detail {

template <typename S>
void collect_conv(std::vector<NamedTensor<S>>& out, const std::string& prefix, ConvParams<S>& p) {
    out.push_back({prefix + ".weight", &p.weight, true});
    out.push_back({prefix + ".bias", &p.bias, true});
}

template <typename S>
void collect_bn(std::vector<NamedTensor<S>>& out, const std::string& prefix,
                BatchNormParams<S>& p) {
    out.push_back({prefix + ".gamma", &p.gamma, true});
    out.push_back({prefix + ".beta", &p.beta, true});
    out.push_back({prefix + ".running_mean", &p.running_mean, false});
    out.push_back({prefix + ".running_var", &p.running_var, false});
}

}  // namespace detail

/// Stable, ordered enumeration of every tensor slot (parameters and BN
/// buffers). The order defines the checkpoint manifest layout.
template <typename S>
std::vector<NamedTensor<S>> named_tensors(Network<S>& net) {
    std::vector<NamedTensor<S>> out;
    for (size_t i = 0; i < net.dual_stages.size(); ++i) {
        auto& stage = net.dual_stages[i];
        for (size_t j = 0; j < stage.blocks.size(); ++j) {
            const std::string p = "dual.s" + std::to_string(i) + ".b" + std::to_string(j);
            auto& b = stage.blocks[j];
            detail::collect_conv(out, p + ".conv_a", b.conv_a);
            detail::collect_bn(out, p + ".bn_a", b.bn_a);
            detail::collect_conv(out, p + ".conv_b", b.conv_b);
            detail::collect_bn(out, p + ".bn_b", b.bn_b);
            if (b.shortcut) {
                detail::collect_conv(out, p + ".shortcut.conv", b.shortcut->conv);
                detail::collect_bn(out, p + ".shortcut.bn", b.shortcut->bn);
            }
        }
    }
    for (size_t i = 0; i < net.single_stages.size(); ++i) {
        auto& stage = net.single_stages[i];
        const std::string sp = "single.s" + std::to_string(i);
        detail::collect_conv(out, sp + ".lift", stage.lift);
        detail::collect_bn(out, sp + ".lift_bn", stage.lift_bn);
        for (size_t j = 0; j < stage.blocks.size(); ++j) {
            const std::string p = sp + ".b" + std::to_string(j);
            detail::collect_conv(out, p + ".conv", stage.blocks[j].conv);
            detail::collect_bn(out, p + ".bn", stage.blocks[j].bn);
        }
    }
    for (size_t i = 0; i < net.decoder.size(); ++i) {
        const std::string p = "decoder.s" + std::to_string(i);
        detail::collect_conv(out, p + ".up", net.decoder[i].up);
        detail::collect_conv(out, p + ".conv", net.decoder[i].conv);
        detail::collect_bn(out, p + ".bn", net.decoder[i].bn);
    }
    detail::collect_conv(out, "head", net.head);
    return out;
}

template <typename S>
std::vector<NamedTensor<S>> parameters(Network<S>& net) {
    std::vector<NamedTensor<S>> out;
    for (auto& nt : named_tensors(net)) {
        if (nt.trainable) out.push_back(nt);
    }
    return out;
}

/// Exact count of trainable scalars (conv weights and biases, BN gamma and
/// beta; running statistics excluded).
template <typename S>
int64_t count_parameters(Network<S>& net) {
    int64_t n = 0;
    for (const auto& nt : parameters(net)) n += nt.tensor->numel();
    return n;
}

}  // namespace dpe
