#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpe/autodiff.hpp"
#include "dpe/rng.hpp"
#include "dpe/tensor.hpp"

namespace dpe {

template <typename S>
Tensor<S> random_normal(Shape shape, SeededRng& rng, double scale = 1.0) {
    std::vector<S> v(static_cast<size_t>(shape.numel()));
    for (auto& x : v) x = static_cast<S>(rng.normal() * scale);
    return Tensor<S>::from_values(std::move(shape), std::move(v));
}

template <typename S>
Tensor<S> random_uniform(Shape shape, SeededRng& rng, double lo, double hi) {
    std::vector<S> v(static_cast<size_t>(shape.numel()));
    for (auto& x : v) x = static_cast<S>(rng.uniform(lo, hi));
    return Tensor<S>::from_values(std::move(shape), std::move(v));
}

namespace detail {

/// Values uniform in +-[lo, hi]: random but bounded away from the ReLU kink.
inline Tensor<double> random_signed(Shape shape, SeededRng& rng, double lo = 0.2,
                                    double hi = 1.5) {
    std::vector<double> v(static_cast<size_t>(shape.numel()));
    for (auto& x : v) {
        const double mag = rng.uniform(lo, hi);
        x = rng.uniform() < 0.5 ? -mag : mag;
    }
    return Tensor<double>::from_values(std::move(shape), std::move(v));
}

}  // namespace detail

/// Scalar-valued tensor function; records on the tape when one is given.
using ScalarFn = std::function<Tensor<double>(Tape<double>*, const Tensor<double>&)>;

/// Central-difference gradient check in 64-bit mode.
///
/// Runs f once under the tape to get the autodiff gradient of x, then probes
/// f at x +- eps*e_i per coordinate and returns
/// max_i |ad_i - fd_i| / max(1, |fd_i|). When x has more than max_coords
/// elements a seeded coordinate subset is probed instead (the autodiff side
/// is always the full gradient). Callers pick inputs away from kinks.
inline double finite_difference_check(const ScalarFn& f, const Tensor<double>& x, double eps,
                                      int64_t max_coords = -1, uint64_t coord_seed = 17) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) {
        throw usage_error("finite_difference_check: eps must lie in [1e-7, 1e-3]");
    }
    Tensor<double> probe = x.clone();
    probe.set_requires_grad(true);

    Tape<double> tape;
    Tensor<double> loss = f(&tape, probe);
    if (loss.numel() != 1) {
        throw shape_error("finite_difference_check: f must be scalar-valued, got shape " +
                          loss.shape().to_string());
    }
    Gradients<double> grads = tape.backward(loss);
    Tensor<double> ad = grads.grad(probe);

    std::vector<int64_t> coords;
    if (max_coords < 0 || x.numel() <= max_coords) {
        coords.resize(static_cast<size_t>(x.numel()));
        for (size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<int64_t>(i);
    } else {
        SeededRng rng(coord_seed);
        coords.resize(static_cast<size_t>(max_coords));
        for (auto& c : coords) c = static_cast<int64_t>(rng.uniform_index(
            static_cast<uint64_t>(x.numel())));
    }

    double max_err = 0.0;
    for (int64_t i : coords) {
        Tensor<double> xp = probe.clone();
        xp.mutable_data()[static_cast<size_t>(i)] += eps;
        const double fp = f(nullptr, xp).item();
        Tensor<double> xm = probe.clone();
        xm.mutable_data()[static_cast<size_t>(i)] -= eps;
        const double fm = f(nullptr, xm).item();
        const double fd = (fp - fm) / (2.0 * eps);
        const double err = std::abs(ad.data()[static_cast<size_t>(i)] - fd) /
                           std::max(1.0, std::abs(fd));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

/// Gradient check of a loss w.r.t. a parameter slot of a model: installs
/// perturbed candidates into *slot, restoring the original afterwards.
inline double finite_difference_check_param(const std::function<Tensor<double>(Tape<double>*)>& loss_fn,
                                            Tensor<double>* slot, double eps,
                                            int64_t max_coords = -1, uint64_t coord_seed = 17) {
    Tensor<double> original = *slot;
    ScalarFn f = [&](Tape<double>* tape, const Tensor<double>& candidate) {
        *slot = candidate;
        return loss_fn(tape);
    };
    const double err = finite_difference_check(f, original, eps, max_coords, coord_seed);
    *slot = original;
    return err;
}

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

inline bool all_passed(const std::vector<GradCheckCase>& cases) {
    return std::all_of(cases.begin(), cases.end(),
                       [](const GradCheckCase& c) { return c.passed; });
}

}  // namespace dpe
