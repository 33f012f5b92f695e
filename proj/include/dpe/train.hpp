#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/data.hpp"
#include "dpe/metrics.hpp"
#include "dpe/net.hpp"
#include "dpe/ops.hpp"
#include "dpe/optim.hpp"

namespace dpe {

struct TrainConfig {
    int64_t epochs = 40;
    int64_t batch_size = 8;
    double lr = 1e-4;
    double momentum = 0.9;
    uint64_t seed = 1;
    bool shuffle = true;       // reshuffle the train split every epoch
    int64_t eval_every = 5;    // validation cadence, in epochs
    double threshold = 0.5;    // probability binarization for metrics

    void validate() const {
        if (epochs < 1) throw config_error("epochs must be >= 1");
        if (batch_size < 1) throw config_error("batch_size must be >= 1");
        if (!(lr > 0) && lr != 0.0) throw config_error("lr must be >= 0");
        if (momentum < 0 || momentum >= 1) throw config_error("momentum must lie in [0, 1)");
        if (eval_every < 1) throw config_error("eval_every must be >= 1");
        if (!(threshold > 0 && threshold < 1)) throw config_error("threshold must lie in (0, 1)");
    }
};

struct TrainLogRow {
    int64_t epoch = 0;
    int64_t step = 0;  // global optimizer step
    double loss = 0.0;
    std::optional<double> mdice_val;
    std::optional<double> miou_val;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    std::vector<double> epoch_mean_loss;
};

inline void write_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    os << "epoch,step,loss,mdice_val,miou_val\n";
    for (const auto& r : log.rows) {
        os << r.epoch << ',' << r.step << ',' << std::setprecision(9) << r.loss << ',';
        if (r.mdice_val) os << std::setprecision(6) << *r.mdice_val;
        os << ',';
        if (r.miou_val) os << std::setprecision(6) << *r.miou_val;
        os << '\n';
    }
    if (!os) throw io_error("failed writing '" + path + "'");
}

struct EvalRow {
    std::string id;
    double dice = 0.0;
    double iou = 0.0;
    double accuracy = 0.0;
};

struct EvalReport {
    double mdice = 0.0;      // per-image mean (the headline numbers)
    double miou = 0.0;
    double accuracy = 0.0;
    int64_t n_images = 0;
    double pooled_dice = 0.0;  // from summed confusion counts, for reference
    double pooled_iou = 0.0;
    std::vector<EvalRow> rows;

    std::string machine_line() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(6) << "mdice=" << mdice << " miou=" << miou
           << " accuracy=" << accuracy << " n_images=" << n_images;
        return os.str();
    }

    std::string to_text() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(6);
        os << "id dice iou accuracy\n";
        for (const auto& r : rows) {
            os << r.id << ' ' << r.dice << ' ' << r.iou << ' ' << r.accuracy << '\n';
        }
        os << "pooled_dice=" << pooled_dice << " pooled_iou=" << pooled_iou << '\n';
        os << machine_line() << '\n';
        return os.str();
    }
};

/// Pulls samples by id; the indirection keeps training decoupled from the
/// on-disk layout and lets tests observe exactly which ids get touched.
using SampleLoader = std::function<Sample(const std::string&)>;

inline SampleLoader directory_loader(std::string dir) {
    return [dir = std::move(dir)](const std::string& id) { return load_sample(dir, id); };
}

inline SampleLoader memory_loader(std::vector<Sample> samples) {
    auto store = std::make_shared<std::vector<Sample>>(std::move(samples));
    return [store](const std::string& id) {
        for (const auto& s : *store) {
            if (s.id == id) return s;
        }
        throw data_error("sample '" + id + "' not found");
    };
}

/// Eval-mode inference and per-image metrics over an id list.
inline EvalReport evaluate(Network<float>& net, const SampleLoader& loader,
                           const std::vector<std::string>& ids, double threshold) {
    if (ids.empty()) throw data_error("evaluate: empty id list");
    EvalReport report;
    ConfusionCounts pooled;
    std::vector<double> dices, ious, accs;
    for (const auto& id : ids) {
        Sample s = standardize_sample(loader(id), net.cfg.input_h, net.cfg.input_w);
        std::vector<Sample> one{s};
        Tensor<float> logits = forward(net, nullptr, stack_images(one), false);
        Tensor<float> prob = sigmoid<float>(nullptr, logits);
        ConfusionCounts c = confusion_from_masks(prob, stack_masks(one), threshold).front();
        pooled += c;
        dices.push_back(dice(c));
        ious.push_back(iou(c));
        accs.push_back(pixel_accuracy(c));
        report.rows.push_back({id, dices.back(), ious.back(), accs.back()});
    }
    report.mdice = aggregate_mean(dices);
    report.miou = aggregate_mean(ious);
    report.accuracy = aggregate_mean(accs);
    report.n_images = static_cast<int64_t>(ids.size());
    report.pooled_dice = dice(pooled);
    report.pooled_iou = iou(pooled);
    return report;
}

/// Mini-batch SGDM training over the train split. Per epoch: a seeded
/// shuffle, batches of cfg.batch_size (final partial batch kept), train-mode
/// forward, BCE-with-logits loss, backward, one optimizer step per batch.
/// Validation mDice/mIoU is computed every eval_every epochs and attached to
/// that epoch's last row. Deterministic given (net, data, cfg.seed).
inline TrainLog train_loop(Network<float>& net, const SampleLoader& loader,
                           const DatasetSplit& split, const TrainConfig& cfg) {
    cfg.validate();
    if (split.train.empty()) throw data_error("train_loop: empty train split");

    auto params = parameters(net);
    Sgdm<float> opt(cfg.lr, cfg.momentum);
    SeededRng shuffle_rng(cfg.seed);
    TrainLog log;
    int64_t global_step = 0;

    for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::string> order = split.train;
        if (cfg.shuffle) {
            SeededRng rng = shuffle_rng.fork(static_cast<uint64_t>(epoch));
            for (size_t i = order.size() - 1; i > 0; --i) {
                std::swap(order[i], order[static_cast<size_t>(rng.uniform_index(i + 1))]);
            }
        }

        double loss_sum = 0.0;
        int64_t batches = 0;
        for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
            std::vector<Sample> batch;
            for (size_t i = pos; i < end; ++i) {
                batch.push_back(
                    standardize_sample(loader(order[i]), net.cfg.input_h, net.cfg.input_w));
            }
            Tensor<float> x = stack_images(batch);
            Tensor<float> t = stack_masks(batch);
            try {
                Tape<float> tape;
                Tensor<float> logits = forward(net, &tape, x, true);
                Tensor<float> loss = bce_with_logits(&tape, logits, t);
                Gradients<float> grads = tape.backward(loss);
                opt.step(params, grads);
                loss_sum += loss.item();
                ++batches;
                log.rows.push_back({epoch, ++global_step, loss.item(), std::nullopt, std::nullopt});
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::numeric) {
                    throw numeric_error("training diverged at epoch " + std::to_string(epoch) +
                                        " step " + std::to_string(global_step + 1) + ": " +
                                        e.what());
                }
                throw;
            }
        }
        log.epoch_mean_loss.push_back(loss_sum / static_cast<double>(batches));

        if (epoch % cfg.eval_every == 0 && !split.validation.empty() && !log.rows.empty()) {
            EvalReport report = evaluate(net, loader, split.validation, cfg.threshold);
            log.rows.back().mdice_val = report.mdice;
            log.rows.back().miou_val = report.miou;
        }
    }
    return log;
}

}  // namespace dpe
