#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/error.hpp"

namespace dpe {

/// Dense extents, at most rank 4. The semantic order for image tensors is
/// NCHW: batch, channels, height, width.
class Shape {
public:
    static constexpr int kMaxRank = 4;

    Shape() = default;

    Shape(std::initializer_list<int64_t> dims) : Shape(std::vector<int64_t>(dims)) {}

    explicit Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) {
        if (dims_.size() > kMaxRank) {
            throw shape_error("shape rank " + std::to_string(dims_.size()) +
                              " exceeds maximum rank 4");
        }
        int64_t n = 1;
        for (int64_t d : dims_) {
            if (d < 1) {
                throw shape_error("shape extent " + std::to_string(d) + " must be >= 1");
            }
            if (n > std::numeric_limits<int64_t>::max() / d) {
                throw shape_error("shape element count overflows index type");
            }
            n *= d;
        }
        numel_ = n;
    }

    int rank() const { return static_cast<int>(dims_.size()); }
    int64_t dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int64_t>& dims() const { return dims_; }
    int64_t numel() const { return numel_; }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    /// Row-major flat offset for a rank-4 shape.
    int64_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return ((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
    }

    std::string to_string() const {
        std::ostringstream os;
        os << '(';
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) os << ',';
            os << dims_[i];
        }
        os << ')';
        return os.str();
    }

private:
    std::vector<int64_t> dims_;
    int64_t numel_ = 1;
};

template <typename S>
using ArrayMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <typename S>
using ConstArrayMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

/// Dense row-major tensor, templated on scalar (float for training and
/// inference, double for gradient checking). Copies are shallow handles to
/// shared immutable storage; ops never modify their inputs. The identity of
/// the storage is what the autodiff tape keys gradients by.
template <typename S>
class Tensor {
public:
    Tensor() : impl_(std::make_shared<Storage>()) {
        impl_->shape = Shape({1});
        impl_->data.assign(1, S(0));
    }

    static Tensor zeros(Shape shape) { return full(std::move(shape), S(0)); }
    static Tensor ones(Shape shape) { return full(std::move(shape), S(1)); }

    static Tensor full(Shape shape, S value) {
        if (!std::isfinite(static_cast<double>(value))) {
            throw numeric_error("tensor fill value is not finite");
        }
        Tensor t;
        t.impl_->shape = std::move(shape);
        t.impl_->data.assign(static_cast<size_t>(t.impl_->shape.numel()), value);
        return t;
    }

    static Tensor from_values(Shape shape, std::vector<S> values) {
        if (static_cast<int64_t>(values.size()) != shape.numel()) {
            throw shape_error("value list length " + std::to_string(values.size()) +
                              " does not match shape " + shape.to_string() + " element count " +
                              std::to_string(shape.numel()));
        }
        Tensor t;
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(values);
        t.ensure_finite("tensor construction");
        return t;
    }

    static Tensor from_values(Shape shape, std::initializer_list<S> values) {
        return from_values(std::move(shape), std::vector<S>(values));
    }

    static Tensor scalar(S value) { return full(Shape({1}), value); }

    const Shape& shape() const { return impl_->shape; }
    int64_t numel() const { return impl_->shape.numel(); }

    const std::vector<S>& data() const { return impl_->data; }

    /// Direct write access. Reserved for parameter updates, running-stat
    /// updates and buffer fills; forward/backward ops never mutate inputs.
    std::vector<S>& mutable_data() { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        impl_->requires_grad = v;
        return *this;
    }

    /// Value of a one-element tensor.
    S item() const {
        if (numel() != 1) {
            throw shape_error("item() requires a scalar tensor, got shape " +
                              impl_->shape.to_string());
        }
        return impl_->data[0];
    }

    S at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return impl_->data[static_cast<size_t>(impl_->shape.offset(n, c, h, w))];
    }

    /// Deep copy with fresh storage identity.
    Tensor clone() const {
        Tensor t;
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        t.impl_->requires_grad = impl_->requires_grad;
        return t;
    }

    template <typename T>
    Tensor<T> cast() const {
        std::vector<T> out(impl_->data.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(impl_->data[i]);
        auto t = Tensor<T>::from_values(impl_->shape, std::move(out));
        t.set_requires_grad(impl_->requires_grad);
        return t;
    }

    ConstArrayMap<S> array() const {
        return ConstArrayMap<S>(impl_->data.data(), static_cast<Eigen::Index>(impl_->data.size()));
    }
    ArrayMap<S> mutable_array() {
        return ArrayMap<S>(impl_->data.data(), static_cast<Eigen::Index>(impl_->data.size()));
    }

    bool all_finite() const { return array().isFinite().all(); }

    /// NaN/Inf is an error state, never silent.
    void ensure_finite(const char* context) const {
        if (!all_finite()) {
            throw numeric_error(std::string(context) + " produced a non-finite value");
        }
    }

    /// Storage identity, the gradient-map key.
    const void* id() const { return impl_.get(); }

    bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

private:
    struct Storage {
        Shape shape;
        std::vector<S> data;
        bool requires_grad = false;
    };

    std::shared_ptr<Storage> impl_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

template <typename S>
inline void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw shape_error(std::string(op) + ": shape mismatch " + a.shape().to_string() +
                          " vs " + b.shape().to_string());
    }
}

template <typename S>
inline void check_rank4(const Tensor<S>& t, const char* op) {
    if (t.shape().rank() != 4) {
        throw shape_error(std::string(op) + ": expected rank-4 NCHW tensor, got shape " +
                          t.shape().to_string());
    }
}

}  // namespace detail

}  // namespace dpe
