#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "dpe/tensor.hpp"

namespace dpe {

struct ConfusionCounts {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    int64_t tn = 0;

    int64_t total() const { return tp + fp + fn + tn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

/// Per-image confusion counts of thresholded probabilities against a binary
/// truth mask. pred = (prob >= threshold).
template <typename S>
std::vector<ConfusionCounts> confusion_from_masks(const Tensor<S>& pred_prob,
                                                  const Tensor<S>& truth, double threshold) {
    if (pred_prob.shape() != truth.shape()) {
        throw shape_error("confusion_from_masks: shape mismatch " +
                          pred_prob.shape().to_string() + " vs " + truth.shape().to_string());
    }
    detail::check_rank4(pred_prob, "confusion_from_masks");
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw usage_error("confusion_from_masks: threshold must lie in (0, 1)");
    }
    const int64_t n = pred_prob.shape().dim(0);
    const int64_t per_image = pred_prob.numel() / n;
    std::vector<ConfusionCounts> out(static_cast<size_t>(n));
    const S* p = pred_prob.data().data();
    const S* t = truth.data().data();
    for (int64_t in = 0; in < n; ++in) {
        ConfusionCounts& c = out[static_cast<size_t>(in)];
        for (int64_t i = 0; i < per_image; ++i) {
            const S tv = t[in * per_image + i];
            if (tv != S(0) && tv != S(1)) {
                throw data_error("confusion_from_masks: truth mask is not binary");
            }
            const bool pred = p[in * per_image + i] >= static_cast<S>(threshold);
            const bool pos = tv == S(1);
            if (pred && pos) ++c.tp;
            else if (pred && !pos) ++c.fp;
            else if (!pred && pos) ++c.fn;
            else ++c.tn;
        }
    }
    return out;
}

/// Dice = 2TP / (2TP + FN + FP); 1.0 when both masks are empty (convention).
inline double dice(const ConfusionCounts& c) {
    const int64_t denom = 2 * c.tp + c.fn + c.fp;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// IoU (Jaccard) = TP / (FP + TP + FN); 1.0 when the denominator is zero.
inline double iou(const ConfusionCounts& c) {
    const int64_t denom = c.fp + c.tp + c.fn;
    if (denom == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double pixel_accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw data_error("pixel_accuracy: empty confusion counts");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/// Arithmetic mean of per-image scores: the mDice / mIoU definition used here.
inline double aggregate_mean(const std::vector<double>& values) {
    if (values.empty()) throw data_error("aggregate_mean: empty value list");
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

}  // namespace dpe
