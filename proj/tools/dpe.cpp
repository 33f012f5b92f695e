// Command-line entry point: dataset generation, training, evaluation,
// single-image inference, the four-variant ablation run, gradient checking
// and parameter accounting. Every command is deterministic given its flags;
// seeds are always flags, never wall-clock.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpe/checkpoint.hpp"
#include "dpe/config.hpp"
#include "dpe/data.hpp"
#include "dpe/gradcheck_suite.hpp"
#include "dpe/net.hpp"
#include "dpe/netpbm.hpp"
#include "dpe/train.hpp"

namespace {

struct SizeArg {
    int64_t h = 288;
    int64_t w = 384;
};

SizeArg parse_size(const std::string& s) {
    const size_t x = s.find('x');
    if (x == std::string::npos || x == 0 || x + 1 == s.size()) {
        throw dpe::usage_error("--size expects HxW, e.g. 288x384, got '" + s + "'");
    }
    try {
        SizeArg out;
        out.h = std::stoll(s.substr(0, x));
        out.w = std::stoll(s.substr(x + 1));
        if (out.h < 1 || out.w < 1) throw std::invalid_argument(s);
        return out;
    } catch (const std::exception&) {
        throw dpe::usage_error("--size expects positive HxW, got '" + s + "'");
    }
}

std::vector<int64_t> parse_widths(const std::string& s) {
    return dpe::detail::parse_int_list("widths", s);
}

// Flags override config-file values; only flags the user actually passed win.
struct TrainFlags {
    std::string config_path;
    std::string data_dir;
    std::string out_path;
    std::string log_path;
    std::string variant;
    std::string widths;
    std::optional<double> lr;
    std::optional<int64_t> epochs;
    std::optional<int64_t> batch_size;
    std::optional<int64_t> blocks_per_stage;
    std::optional<uint64_t> seed;
    std::optional<int64_t> eval_every;
    std::optional<double> threshold;
    std::optional<SizeArg> size;
};

dpe::RunConfig resolve_run_config(const TrainFlags& f) {
    dpe::RunConfig rc;
    if (!f.config_path.empty()) rc = dpe::load_run_config(f.config_path);
    if (!f.data_dir.empty()) rc.data_dir = f.data_dir;
    if (!f.out_path.empty()) rc.out_path = f.out_path;
    if (!f.log_path.empty()) rc.log_path = f.log_path;
    if (!f.variant.empty()) rc.net.variant = dpe::parse_variant(f.variant);
    if (!f.widths.empty()) rc.net.stage_widths = parse_widths(f.widths);
    if (f.lr) rc.train.lr = *f.lr;
    if (f.epochs) rc.train.epochs = *f.epochs;
    if (f.batch_size) rc.train.batch_size = *f.batch_size;
    if (f.blocks_per_stage) rc.net.blocks_per_stage = *f.blocks_per_stage;
    if (f.seed) rc.train.seed = *f.seed;
    if (f.eval_every) rc.train.eval_every = *f.eval_every;
    if (f.threshold) rc.train.threshold = *f.threshold;
    if (f.size) {
        rc.net.input_h = f.size->h;
        rc.net.input_w = f.size->w;
    }
    return rc;
}

int cmd_gen_data(int64_t n, const std::string& size, uint64_t seed, const std::string& out) {
    const SizeArg hw = parse_size(size);
    auto samples = dpe::generate_synthetic_dataset(n, hw.h, hw.w, seed);
    std::vector<std::string> ids;
    for (const auto& s : samples) ids.push_back(s.id);
    dpe::DatasetSplit split = dpe::split_dataset(ids, seed);
    dpe::write_dataset(out, samples, split);
    std::cout << "wrote " << n << " samples (" << hw.h << "x" << hw.w << ") to " << out
              << "  split " << split.train.size() << "/" << split.test.size() << "/"
              << split.validation.size() << "\n";
    return 0;
}

int cmd_train(const TrainFlags& flags) {
    dpe::RunConfig rc = resolve_run_config(flags);
    if (rc.data_dir.empty()) throw dpe::usage_error("train: --data (or config 'data') required");
    if (rc.out_path.empty()) throw dpe::usage_error("train: --out (or config 'out') required");
    if (rc.log_path.empty()) rc.log_path = rc.out_path + ".log.csv";

    dpe::DatasetSplit split =
        dpe::read_split_file((std::filesystem::path(rc.data_dir) / "split.txt").string());
    dpe::Network<float> net = dpe::build_network<float>(rc.net, rc.train.seed);
    std::cout << to_string(rc.net.variant) << " network, " << dpe::count_parameters(net)
              << " parameters, " << split.train.size() << " train samples\n";

    dpe::TrainLog log =
        dpe::train_loop(net, dpe::directory_loader(rc.data_dir), split, rc.train);
    dpe::save_checkpoint(net, rc.out_path);
    dpe::write_train_log_csv(rc.log_path, log);
    std::cout << "final epoch mean loss " << std::setprecision(6) << log.epoch_mean_loss.back()
              << "\ncheckpoint -> " << rc.out_path << "\nlog -> " << rc.log_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& split_name,
             double threshold) {
    dpe::Network<float> net = dpe::load_checkpoint(ckpt);
    dpe::DatasetSplit split =
        dpe::read_split_file((std::filesystem::path(data) / "split.txt").string());
    const std::vector<std::string>* ids = nullptr;
    if (split_name == "test") ids = &split.test;
    else if (split_name == "val") ids = &split.validation;
    else throw dpe::usage_error("eval: --split must be test or val");
    dpe::EvalReport report = dpe::evaluate(net, dpe::directory_loader(data), *ids, threshold);
    std::cout << report.to_text();
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image_path,
              const std::string& mask_path, double threshold) {
    dpe::Network<float> net = dpe::load_checkpoint(ckpt);
    dpe::Tensor<float> image = dpe::read_ppm(image_path);
    const int64_t orig_h = image.shape().dim(1), orig_w = image.shape().dim(2);
    dpe::Tensor<float> sized = dpe::resize_bilinear(image, net.cfg.input_h, net.cfg.input_w);

    std::vector<float> batch(sized.data().begin(), sized.data().end());
    dpe::Tensor<float> x = dpe::Tensor<float>::from_values(
        dpe::Shape({1, 3, net.cfg.input_h, net.cfg.input_w}), std::move(batch));
    dpe::Tensor<float> prob = dpe::sigmoid<float>(nullptr, dpe::forward(net, nullptr, x, false));

    std::vector<float> mask(prob.data().size());
    for (size_t i = 0; i < mask.size(); ++i) {
        mask[i] = prob.data()[i] >= static_cast<float>(threshold) ? 1.0f : 0.0f;
    }
    dpe::Tensor<float> m = dpe::Tensor<float>::from_values(
        dpe::Shape({1, net.cfg.input_h, net.cfg.input_w}), std::move(mask));
    m = dpe::resize_nearest(m, orig_h, orig_w);
    dpe::write_pgm(mask_path, m);
    std::cout << "mask -> " << mask_path << "\n";
    return 0;
}

// The four ablation rows share one dataset and seed so they are comparable:
// Network1 = dual branch only, Network2 = single branch only,
// Network3 = both branches at lr 1e-3, DPE-Net = both branches at the base lr.
int cmd_ablate(const TrainFlags& flags) {
    dpe::RunConfig rc = resolve_run_config(flags);
    if (rc.data_dir.empty()) throw dpe::usage_error("ablate: --data required");
    if (rc.out_path.empty()) throw dpe::usage_error("ablate: --out required");
    std::filesystem::create_directories(rc.out_path);

    dpe::DatasetSplit split =
        dpe::read_split_file((std::filesystem::path(rc.data_dir) / "split.txt").string());
    dpe::SampleLoader loader = dpe::directory_loader(rc.data_dir);

    struct Row {
        std::string label;
        std::string slug;
        dpe::NetVariant variant;
        double lr;
    };
    const std::vector<Row> rows = {
        {"Network1 (dual block only)", "network1", dpe::NetVariant::dual_only, rc.train.lr},
        {"Network2 (single block only)", "network2", dpe::NetVariant::single_only, rc.train.lr},
        {"Network3 (both blocks, lr 1e-3)", "network3", dpe::NetVariant::both, 1e-3},
        {"DPE-Net (both blocks)", "dpe_net", dpe::NetVariant::both, rc.train.lr},
    };

    std::ostringstream table;
    table << std::left << std::setw(34) << "model" << std::right << std::setw(10) << "mdice"
          << std::setw(10) << "accuracy" << "\n";
    std::ostringstream csv;
    csv << "model,mdice,accuracy\n";
    for (const auto& row : rows) {
        dpe::NetConfig net_cfg = rc.net;
        net_cfg.variant = row.variant;
        dpe::TrainConfig train_cfg = rc.train;
        train_cfg.lr = row.lr;
        dpe::Network<float> net = dpe::build_network<float>(net_cfg, train_cfg.seed);
        dpe::train_loop(net, loader, split, train_cfg);
        dpe::EvalReport report = dpe::evaluate(net, loader, split.test, train_cfg.threshold);
        dpe::save_checkpoint(
            net, (std::filesystem::path(rc.out_path) / (row.slug + ".dpec")).string());
        table << std::left << std::setw(34) << row.label << std::right << std::fixed
              << std::setprecision(4) << std::setw(10) << report.mdice << std::setw(10)
              << report.accuracy << "\n";
        csv << row.label << ',' << std::fixed << std::setprecision(6) << report.mdice << ','
            << report.accuracy << "\n";
    }
    std::cout << table.str();
    std::ofstream table_os((std::filesystem::path(rc.out_path) / "ablation.txt").string());
    table_os << table.str();
    std::ofstream csv_os((std::filesystem::path(rc.out_path) / "ablation.csv").string());
    csv_os << csv.str();
    if (!table_os || !csv_os) throw dpe::io_error("ablate: failed writing results");
    std::cout << "results -> " << rc.out_path << "\n";
    return 0;
}

int cmd_gradcheck() {
    const auto start = std::chrono::steady_clock::now();
    auto cases = dpe::run_gradient_checks();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& c : cases) {
        std::cout << (c.passed ? "ok   " : "FAIL ") << std::left << std::setw(28) << c.name
                  << " max_rel_err " << std::scientific << std::setprecision(3) << c.max_rel_err
                  << " (threshold " << c.threshold << ")\n";
    }
    std::cout << cases.size() << " checks in " << std::fixed << std::setprecision(1) << secs
              << "s\n";
    return dpe::all_passed(cases) ? 0 : 1;
}

int cmd_count_params(const TrainFlags& flags) {
    dpe::RunConfig rc = resolve_run_config(flags);
    dpe::Network<float> net = dpe::build_network<float>(rc.net, rc.train.seed);
    std::cout << dpe::count_parameters(net) << "\n";
    return 0;
}

void add_train_like_flags(CLI::App* cmd, TrainFlags& f, bool with_out) {
    cmd->add_option("--config", f.config_path, "key = value config file");
    cmd->add_option("--data", f.data_dir, "dataset directory");
    if (with_out) cmd->add_option("--out", f.out_path, "output path");
    cmd->add_option("--log", f.log_path, "CSV training log path");
    cmd->add_option("--variant", f.variant, "dual_only|single_only|both");
    cmd->add_option("--widths", f.widths, "stage widths, e.g. 16,32,64,128");
    cmd->add_option("--lr", f.lr, "learning rate (default 1e-4)");
    cmd->add_option("--epochs", f.epochs, "training epochs (default 40)");
    cmd->add_option("--batch-size", f.batch_size, "mini-batch size (default 8)");
    cmd->add_option("--blocks-per-stage", f.blocks_per_stage, "blocks per stage (default 1)");
    cmd->add_option("--seed", f.seed, "deterministic seed (default 1)");
    cmd->add_option("--eval-every", f.eval_every, "validation cadence in epochs (default 5)");
    cmd->add_option("--threshold", f.threshold, "mask binarization threshold (default 0.5)");
    cmd->add_option_function<std::string>(
        "--size", [&f](const std::string& s) { f.size = parse_size(s); },
        "input resolution HxW (default 288x384)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-parallel-encoder polyp segmentation toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    int64_t gen_n = 16;
    std::string gen_size = "288x384";
    uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--n", gen_n, "number of samples")->required();
    gen->add_option("--size", gen_size, "sample resolution HxW (default 288x384)");
    gen->add_option("--seed", gen_seed, "deterministic seed (default 1)");
    gen->add_option("--out", gen_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train a network, write checkpoint + CSV log");
    TrainFlags train_flags;
    add_train_like_flags(train, train_flags, true);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string eval_ckpt, eval_data, eval_split = "test";
    double eval_threshold = 0.5;
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--split", eval_split, "test|val (default test)");
    eval->add_option("--threshold", eval_threshold, "binarization threshold (default 0.5)");

    // infer
    auto* infer = app.add_subcommand("infer", "segment one PPM image into a PGM mask");
    std::string infer_ckpt, infer_image, infer_mask;
    double infer_threshold = 0.5;
    infer->add_option("--ckpt", infer_ckpt, "checkpoint path")->required();
    infer->add_option("--image", infer_image, "input PPM image")->required();
    infer->add_option("--mask", infer_mask, "output PGM mask")->required();
    infer->add_option("--threshold", infer_threshold, "binarization threshold (default 0.5)");

    // ablate
    auto* ablate = app.add_subcommand(
        "ablate", "train and evaluate all four network variants on one dataset");
    TrainFlags ablate_flags;
    add_train_like_flags(ablate, ablate_flags, true);

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference check of every backward rule");

    // count-params
    auto* count = app.add_subcommand("count-params", "print the trainable parameter count");
    TrainFlags count_flags;
    add_train_like_flags(count, count_flags, false);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(gen_n, gen_size, gen_seed, gen_out);
        if (train->parsed()) return cmd_train(train_flags);
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_threshold);
        if (infer->parsed()) return cmd_infer(infer_ckpt, infer_image, infer_mask, infer_threshold);
        if (ablate->parsed()) return cmd_ablate(ablate_flags);
        if (app.get_subcommand("gradcheck")->parsed()) return cmd_gradcheck();
        if (count->parsed()) return cmd_count_params(count_flags);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error:usage: " << e.what() << "\n";
        return 2;
    } catch (const dpe::Error& e) {
        std::cerr << "error:" << e.category() << ": " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error:internal: " << e.what() << "\n";
        return static_cast<int>(dpe::ErrorKind::internal);
    }
}
