#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dpe/tensor.hpp"

namespace dpe {

/// Gradient accumulator keyed by tensor storage identity. When a tensor
/// feeds several consumers the per-consumer contributions add up here.
template <typename S>
class Gradients {
public:
    void accumulate(const Tensor<S>& t, const Tensor<S>& g) {
        if (g.shape() != t.shape()) {
            throw shape_error("gradient shape " + g.shape().to_string() +
                              " does not match tensor shape " + t.shape().to_string());
        }
        g.ensure_finite("backward");
        auto it = grads_.find(t.id());
        if (it == grads_.end()) {
            grads_.emplace(t.id(), g.clone());
        } else {
            it->second.mutable_array() += g.array();
        }
    }

    bool has(const Tensor<S>& t) const { return grads_.count(t.id()) != 0; }

    /// Gradient for t; zeros when t never received a contribution
    /// (an unused leaf has zero gradient by definition).
    Tensor<S> grad(const Tensor<S>& t) const {
        auto it = grads_.find(t.id());
        if (it == grads_.end()) return Tensor<S>::zeros(t.shape());
        return it->second;
    }

    size_t size() const { return grads_.size(); }

private:
    std::unordered_map<const void*, Tensor<S>> grads_;
};

/// Dynamic per-forward-pass tape: an append-only sequence of recorded
/// operations in execution order, so position order is topological order.
/// A tape belongs to one logical thread and is discarded after backward().
template <typename S>
class Tape {
public:
    using BackwardFn = std::function<void(Tensor<S> grad_out, Gradients<S>& grads)>;

    /// Appends a node. The output is marked as requiring grad so that
    /// downstream ops keep recording.
    void record(std::vector<Tensor<S>> inputs, Tensor<S> output, BackwardFn backward) {
        output.set_requires_grad(true);
        output_ids_.insert(output.id());
        nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
    }

    bool produced(const Tensor<S>& t) const { return output_ids_.count(t.id()) != 0; }

    size_t node_count() const { return nodes_.size(); }

    /// Reverse topological sweep from a scalar loss. Returns the gradient
    /// map over every tensor that received a contribution.
    Gradients<S> backward(const Tensor<S>& loss) const {
        if (loss.numel() != 1) {
            throw shape_error("backward() requires a scalar loss, got shape " +
                              loss.shape().to_string());
        }
        if (!produced(loss)) {
            throw Error(ErrorKind::internal, "backward() loss was not produced on this tape");
        }
        Gradients<S> grads;
        grads.accumulate(loss, Tensor<S>::ones(loss.shape()));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (!grads.has(it->output)) continue;  // not reachable from the loss
            // Pass the handle by value: accumulate() may rehash the map.
            it->backward(grads.grad(it->output), grads);
        }
        return grads;
    }

private:
    struct Node {
        std::vector<Tensor<S>> inputs;
        Tensor<S> output;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::unordered_set<const void*> output_ids_;
};

/// True when an op invoked with these inputs should record itself.
template <typename S>
inline bool tracing(const Tape<S>* tape, std::initializer_list<const Tensor<S>*> inputs) {
    if (!tape) return false;
    for (const Tensor<S>* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

}  // namespace dpe
