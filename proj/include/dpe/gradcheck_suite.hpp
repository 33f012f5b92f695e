#pragma once

#include <string>
#include <vector>

#include "dpe/batchnorm.hpp"
#include "dpe/blocks.hpp"
#include "dpe/conv.hpp"
#include "dpe/gradcheck.hpp"
#include "dpe/net.hpp"
#include "dpe/ops.hpp"

namespace dpe {

/// Central-difference verification of every differentiable op's backward
/// rule plus both block types and an end-to-end desk-scale network, in
/// 64-bit mode with eps 1e-5. Probed tensors stay at or below 64 elements
/// (larger parameters are probed on a seeded 64-coordinate subset) and
/// inputs are sampled away from ReLU and pooling kinks.
inline std::vector<GradCheckCase> run_gradient_checks() {
    constexpr double kEps = 1e-5;
    constexpr double kOpThreshold = 1e-5;
    constexpr double kEndToEndThreshold = 1e-4;
    constexpr int64_t kMaxCoords = 64;

    std::vector<GradCheckCase> cases;
    auto report = [&cases](const std::string& name, double thr, double err) {
        cases.push_back({name, err, thr, err < thr});
    };

    SeededRng rng(90210);

    {  // add
        auto x = random_normal<double>(Shape({1, 2, 4, 4}), rng);
        auto y = random_normal<double>(Shape({1, 2, 4, 4}), rng);
        report("add", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, add(t, v, y));
            },
            x, kEps));
    }
    {  // reduce_mean
        auto x = random_normal<double>(Shape({1, 1, 4, 4}), rng);
        report("reduce_mean", kOpThreshold, finite_difference_check(
            [](Tape<double>* t, const Tensor<double>& v) { return reduce_mean(t, v); }, x,
            kEps));
    }
    {  // relu, away from the kink
        auto x = detail::random_signed(Shape({1, 2, 4, 4}), rng);
        report("relu", kOpThreshold, finite_difference_check(
            [](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, relu(t, v));
            },
            x, kEps));
    }
    {  // sigmoid
        auto x = random_normal<double>(Shape({1, 2, 4, 4}), rng);
        report("sigmoid", kOpThreshold, finite_difference_check(
            [](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, sigmoid(t, v));
            },
            x, kEps));
    }
    {  // conv2d 1x1: input, weight, bias (sigmoid head makes grads non-uniform)
        SeededRng wrng(11);
        auto p = make_conv<double>(wrng, 3, 2, 1);
        auto x = random_normal<double>(Shape({1, 2, 3, 3}), rng);
        auto loss = [&](Tape<double>* t, const Tensor<double>& v) {
            return reduce_mean(t, sigmoid(t, conv2d(t, v, p)));
        };
        report("conv2d_1x1/input", kOpThreshold, finite_difference_check(loss, x, kEps));
        auto loss_at_x = [&](Tape<double>* t) {
            return reduce_mean(t, sigmoid(t, conv2d(t, x, p)));
        };
        report("conv2d_1x1/weight", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.weight, kEps, kMaxCoords));
        report("conv2d_1x1/bias", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.bias, kEps, kMaxCoords));
    }
    {  // conv2d 3x3
        SeededRng wrng(12);
        auto p = make_conv<double>(wrng, 2, 2, 3);
        auto x = random_normal<double>(Shape({1, 2, 4, 4}), rng);
        auto loss_at_x = [&](Tape<double>* t) {
            return reduce_mean(t, sigmoid(t, conv2d(t, x, p)));
        };
        report("conv2d_3x3/input", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, sigmoid(t, conv2d(t, v, p)));
            },
            x, kEps));
        report("conv2d_3x3/weight", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.weight, kEps, kMaxCoords));
        report("conv2d_3x3/bias", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.bias, kEps, kMaxCoords));
    }
    {  // conv_transpose2d
        SeededRng wrng(13);
        auto p = make_conv_transpose<double>(wrng, 2, 3);
        auto x = random_normal<double>(Shape({1, 2, 3, 3}), rng);
        auto loss_at_x = [&](Tape<double>* t) {
            return reduce_mean(t, sigmoid(t, conv_transpose2d(t, x, p)));
        };
        report("conv_transpose2d/input", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, sigmoid(t, conv_transpose2d(t, v, p)));
            },
            x, kEps));
        report("conv_transpose2d/weight", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.weight, kEps, kMaxCoords));
        report("conv_transpose2d/bias", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.bias, kEps, kMaxCoords));
    }
    {  // batch_norm, training mode
        SeededRng wrng(14);
        auto p = make_batch_norm<double>(2);
        p.gamma = random_uniform<double>(Shape({2}), wrng, 0.5, 1.5).set_requires_grad(true);
        p.beta = random_normal<double>(Shape({2}), wrng, 0.3).set_requires_grad(true);
        auto x = random_normal<double>(Shape({2, 2, 3, 3}), rng);
        auto loss_at_x = [&](Tape<double>* t) {
            return reduce_mean(t, sigmoid(t, batch_norm(t, x, p, true)));
        };
        report("batch_norm/input", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, sigmoid(t, batch_norm(t, v, p, true)));
            },
            x, kEps));
        report("batch_norm/gamma", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.gamma, kEps, kMaxCoords));
        report("batch_norm/beta", kOpThreshold,
               finite_difference_check_param(loss_at_x, &p.beta, kEps, kMaxCoords));
    }
    {  // max_pool2 on distinct values (ties have probability zero)
        auto x = random_normal<double>(Shape({1, 2, 4, 4}), rng);
        report("max_pool2", kOpThreshold, finite_difference_check(
            [](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, sigmoid(t, max_pool2(t, v)));
            },
            x, kEps));
    }
    {  // concat_channels
        auto x = random_normal<double>(Shape({1, 2, 3, 3}), rng);
        auto y = random_normal<double>(Shape({1, 3, 3, 3}), rng);
        report("concat_channels", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, sigmoid(t, concat_channels(t, v, y)));
            },
            x, kEps));
    }
    {  // bce_with_logits
        auto z = random_normal<double>(Shape({1, 1, 4, 4}), rng);
        auto t01 = random_uniform<double>(Shape({1, 1, 4, 4}), rng, 0.05, 0.95);
        report("bce_with_logits", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return bce_with_logits(t, v, t01);
            },
            z, kEps));
    }
    {  // dual block, projection variant (2 -> 3 channels)
        SeededRng wrng(15);
        auto block = make_dual_block<double>(wrng, 2, 3);
        auto x = random_normal<double>(Shape({1, 2, 4, 4}), rng);
        auto loss_at_x = [&](Tape<double>* t) {
            return reduce_mean(t, dual_block_forward(t, x, block, true));
        };
        report("dual_block/input", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, dual_block_forward(t, v, block, true));
            },
            x, kEps));
        double worst = 0.0;
        std::vector<Tensor<double>*> slots = {
            &block.conv_a.weight, &block.conv_a.bias, &block.bn_a.gamma, &block.bn_a.beta,
            &block.conv_b.weight, &block.conv_b.bias, &block.bn_b.gamma, &block.bn_b.beta,
            &block.shortcut->conv.weight, &block.shortcut->conv.bias,
            &block.shortcut->bn.gamma, &block.shortcut->bn.beta};
        for (Tensor<double>* slot : slots) {
            worst = std::max(worst,
                             finite_difference_check_param(loss_at_x, slot, kEps, kMaxCoords));
        }
        report("dual_block/params", kOpThreshold, worst);
    }
    {  // single block
        SeededRng wrng(16);
        auto block = make_single_block<double>(wrng, 3);
        auto x = random_normal<double>(Shape({1, 3, 4, 4}), rng);
        auto loss_at_x = [&](Tape<double>* t) {
            return reduce_mean(t, single_block_forward(t, x, block, true));
        };
        report("single_block/input", kOpThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return reduce_mean(t, single_block_forward(t, v, block, true));
            },
            x, kEps));
        double worst = 0.0;
        std::vector<Tensor<double>*> slots = {&block.conv.weight, &block.conv.bias,
                                              &block.bn.gamma, &block.bn.beta};
        for (Tensor<double>* slot : slots) {
            worst = std::max(worst,
                             finite_difference_check_param(loss_at_x, slot, kEps, kMaxCoords));
        }
        report("single_block/params", kOpThreshold, worst);
    }
    {  // end-to-end desk network, BCE loss, sampled coordinates per parameter
        NetConfig cfg;
        cfg.variant = NetVariant::both;
        cfg.stage_widths = {2, 4};
        cfg.blocks_per_stage = 1;
        cfg.input_channels = 3;
        cfg.input_h = 8;
        cfg.input_w = 8;
        Network<double> net = build_network<double>(cfg, 404);
        auto x = random_normal<double>(Shape({1, 3, 8, 8}), rng);
        auto targets = random_uniform<double>(Shape({1, 1, 8, 8}), rng, 0.05, 0.95);
        auto loss_fn = [&](Tape<double>* t) {
            return bce_with_logits(t, forward(net, t, x, true), targets);
        };
        double worst = 0.0;
        for (auto& p : parameters(net)) {
            worst = std::max(worst,
                             finite_difference_check_param(loss_fn, p.tensor, kEps, 12));
        }
        report("end_to_end/params", kEndToEndThreshold, worst);
        report("end_to_end/input", kEndToEndThreshold, finite_difference_check(
            [&](Tape<double>* t, const Tensor<double>& v) {
                return bce_with_logits(t, forward(net, t, v, true), targets);
            },
            x, kEps));
    }
    return cases;
}

}  // namespace dpe
