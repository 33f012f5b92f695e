#pragma once

#include <string>
#include <unordered_map>

#include "dpe/autodiff.hpp"
#include "dpe/net.hpp"
#include "dpe/tensor.hpp"

namespace dpe {

/// Stochastic gradient descent with classical momentum:
///   v <- momentum * v + g
///   p <- p - lr * v
/// Velocity buffers are created lazily per parameter name and mirror the
/// parameter shapes. With momentum = 0 this is plain gradient descent.
template <typename S>
class Sgdm {
public:
    Sgdm(double lr, double momentum) : lr_(static_cast<S>(lr)), momentum_(static_cast<S>(momentum)) {
        if (lr < 0) throw config_error("Sgdm: lr must be >= 0");
        if (momentum < 0 || momentum >= 1) throw config_error("Sgdm: momentum must lie in [0, 1)");
    }

    void step(const std::vector<NamedTensor<S>>& params, const Gradients<S>& grads) {
        for (const auto& p : params) {
            Tensor<S> g = grads.grad(*p.tensor);
            if (g.shape() != p.tensor->shape()) {
                throw shape_error("Sgdm: gradient shape " + g.shape().to_string() +
                                  " does not match parameter '" + p.name + "' " +
                                  p.tensor->shape().to_string());
            }
            g.ensure_finite("Sgdm gradient");
            auto it = velocity_.find(p.name);
            if (it == velocity_.end()) {
                it = velocity_.emplace(p.name, Tensor<S>::zeros(p.tensor->shape())).first;
            }
            Tensor<S>& v = it->second;
            v.mutable_array() = momentum_ * v.array() + g.array();
            p.tensor->mutable_array() -= lr_ * v.array();
        }
    }

    double lr() const { return lr_; }
    double momentum() const { return momentum_; }

private:
    S lr_;
    S momentum_;
    std::unordered_map<std::string, Tensor<S>> velocity_;
};

}  // namespace dpe
