#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/netpbm.hpp"
#include "dpe/resize.hpp"
#include "dpe/rng.hpp"
#include "dpe/tensor.hpp"

namespace dpe {

struct Sample {
    Tensor<float> image;  // (3,H,W), values in [0,1]
    Tensor<float> mask;   // (1,H,W), values in {0,1}
    std::string id;
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::vector<std::string> validation;
};

namespace detail {

/// Smooth low-frequency noise: bilinear interpolation between seeded lattice
/// values, one value per grid cell corner, output in [0,1].
inline std::vector<float> value_noise(SeededRng& rng, int64_t h, int64_t w, int64_t grid) {
    const int64_t gh = grid + 1, gw = grid + 1;
    std::vector<double> lattice(static_cast<size_t>(gh * gw));
    for (auto& v : lattice) v = rng.uniform();
    std::vector<float> field(static_cast<size_t>(h * w));
    for (int64_t y = 0; y < h; ++y) {
        const double fy = h > 1 ? static_cast<double>(y) / (h - 1) * grid : 0.0;
        const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(fy), grid - 1);
        const double wy = fy - y0;
        for (int64_t x = 0; x < w; ++x) {
            const double fx = w > 1 ? static_cast<double>(x) / (w - 1) * grid : 0.0;
            const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(fx), grid - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * lattice[y0 * gw + x0] + wx * lattice[y0 * gw + x0 + 1];
            const double bot =
                (1.0 - wx) * lattice[(y0 + 1) * gw + x0] + wx * lattice[(y0 + 1) * gw + x0 + 1];
            field[static_cast<size_t>(y * w + x)] = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return field;
}

/// Clamp to [0,1] and quantize to 8-bit levels, so a generated image equals
/// its PPM round trip bit for bit.
inline float quant8(double v) {
    const double c = std::min(1.0, std::max(0.0, v));
    return static_cast<float>(std::lround(c * 255.0) / 255.0);
}

}  // namespace detail

/// One synthetic endoscopy-like sample: a reddish low-frequency background
/// with a single brighter, textured super-ellipse blob; the mask is the
/// exact blob interior. Fully determined by the rng stream.
inline Sample generate_sample(SeededRng rng, int64_t h, int64_t w, std::string id) {
    // Blob geometry. The center band plus the semi-axis cap keep the blob
    // fully inside the frame, which bounds the foreground fraction.
    const double cy = rng.uniform(0.3, 0.7) * h;
    const double cx = rng.uniform(0.3, 0.7) * w;
    const double lim = static_cast<double>(std::min(h, w));
    const double sa = rng.uniform(0.1, 0.3) * lim;
    const double sb = rng.uniform(0.1, 0.3) * lim;
    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    const double power = rng.uniform(1.6, 4.0);
    const double ct = std::cos(theta), st = std::sin(theta);

    auto base = detail::value_noise(rng, h, w, 5);
    auto tint = detail::value_noise(rng, h, w, 9);
    auto texture = detail::value_noise(rng, h, w, 16);

    std::vector<float> img(static_cast<size_t>(3 * h * w));
    std::vector<float> mask(static_cast<size_t>(h * w));
    const int64_t plane = h * w;
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            const int64_t i = y * w + x;
            const double dy = (y + 0.5) - cy, dx = (x + 0.5) - cx;
            const double u = (dx * ct + dy * st) / sa;
            const double v = (-dx * st + dy * ct) / sb;
            const bool inside =
                std::pow(std::abs(u), power) + std::pow(std::abs(v), power) <= 1.0;
            mask[static_cast<size_t>(i)] = inside ? 1.0f : 0.0f;

            // Reddish hue band; the blob gets a strong brightness lift plus
            // its own texture so it is separable but not constant.
            double r = 0.32 + 0.18 * base[i] + 0.06 * tint[i];
            double g = 0.12 + 0.10 * base[i] + 0.04 * tint[i];
            double b = 0.10 + 0.07 * base[i] + 0.03 * tint[i];
            if (inside) {
                const double boost = 0.42 + 0.16 * texture[i];
                r += boost;
                g += 0.9 * boost;
                b += 0.5 * boost;
            }
            img[static_cast<size_t>(0 * plane + i)] = detail::quant8(r);
            img[static_cast<size_t>(1 * plane + i)] = detail::quant8(g);
            img[static_cast<size_t>(2 * plane + i)] = detail::quant8(b);
        }
    }
    Sample s;
    s.image = Tensor<float>::from_values(Shape({3, h, w}), std::move(img));
    s.mask = Tensor<float>::from_values(Shape({1, h, w}), std::move(mask));
    s.id = std::move(id);
    return s;
}

inline std::string sample_id(int64_t index) {
    std::ostringstream os;
    os << "sample_" << std::setfill('0') << std::setw(5) << index;
    return os.str();
}

/// Deterministic dataset: sample i is generated from an independent rng
/// stream derived from (seed, i), so the result is a pure function of
/// (n, h, w, seed).
inline std::vector<Sample> generate_synthetic_dataset(int64_t n, int64_t h, int64_t w,
                                                      uint64_t seed) {
    if (n < 1) throw data_error("generate_synthetic_dataset: n must be >= 1");
    if (h < 16 || w < 16) {
        throw data_error("generate_synthetic_dataset: degenerate dimensions (need H,W >= 16)");
    }
    SeededRng root(seed);
    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        out.push_back(generate_sample(root.fork(static_cast<uint64_t>(i)), h, w, sample_id(i)));
    }
    return out;
}

/// Seeded shuffle, then 80/10/10: train gets floor(0.8n), test floor(0.1n),
/// validation the remainder.
inline DatasetSplit split_dataset(std::vector<std::string> ids, uint64_t seed) {
    const size_t n = ids.size();
    if (n < 10) throw data_error("split_dataset: need at least 10 ids, got " + std::to_string(n));
    SeededRng rng(seed);
    for (size_t i = n - 1; i > 0; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_index(i + 1));
        std::swap(ids[i], ids[j]);
    }
    const size_t n_train = static_cast<size_t>(std::floor(0.8 * static_cast<double>(n)));
    const size_t n_test = static_cast<size_t>(std::floor(0.1 * static_cast<double>(n)));
    DatasetSplit split;
    split.train.assign(ids.begin(), ids.begin() + static_cast<int64_t>(n_train));
    split.test.assign(ids.begin() + static_cast<int64_t>(n_train),
                      ids.begin() + static_cast<int64_t>(n_train + n_test));
    split.validation.assign(ids.begin() + static_cast<int64_t>(n_train + n_test), ids.end());
    return split;
}

// Dataset directory layout: images/<id>.ppm, masks/<id>.pgm, split.txt with
// [train] / [test] / [val] sections, one id per line.

inline void write_split_file(const std::string& path, const DatasetSplit& split) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    os << "[train]\n";
    for (const auto& id : split.train) os << id << "\n";
    os << "[test]\n";
    for (const auto& id : split.test) os << id << "\n";
    os << "[val]\n";
    for (const auto& id : split.validation) os << id << "\n";
    if (!os) throw io_error("failed writing '" + path + "'");
}

inline DatasetSplit read_split_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "' for reading");
    DatasetSplit split;
    std::vector<std::string>* section = nullptr;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "[train]") section = &split.train;
        else if (line == "[test]") section = &split.test;
        else if (line == "[val]") section = &split.validation;
        else if (section) section->push_back(line);
        else throw format_error("split file: id before any section header");
    }
    if (split.train.empty()) throw data_error("split file: empty train section");
    return split;
}

inline void write_dataset(const std::string& dir, const std::vector<Sample>& samples,
                          const DatasetSplit& split) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "images", ec);
    fs::create_directories(fs::path(dir) / "masks", ec);
    if (ec) throw io_error("cannot create dataset directory '" + dir + "'");
    for (const auto& s : samples) {
        write_ppm((fs::path(dir) / "images" / (s.id + ".ppm")).string(), s.image);
        write_pgm((fs::path(dir) / "masks" / (s.id + ".pgm")).string(), s.mask);
    }
    write_split_file((fs::path(dir) / "split.txt").string(), split);
}

/// Loads one image/mask pair; the mask is re-binarized at 0.5 so imported
/// grayscale masks stay within the binary contract.
inline Sample load_sample(const std::string& dir, const std::string& id) {
    namespace fs = std::filesystem;
    Sample s;
    s.id = id;
    s.image = read_ppm((fs::path(dir) / "images" / (id + ".ppm")).string());
    s.mask = read_pgm((fs::path(dir) / "masks" / (id + ".pgm")).string());
    for (auto& v : s.mask.mutable_data()) v = v >= 0.5f ? 1.0f : 0.0f;
    if (s.image.shape().dim(1) != s.mask.shape().dim(1) ||
        s.image.shape().dim(2) != s.mask.shape().dim(2)) {
        throw data_error("sample '" + id + "': image and mask dimensions differ");
    }
    return s;
}

/// Resizes a sample to the target resolution: bilinear for the image,
/// nearest + re-binarize for the mask. No-op when already at target.
inline Sample standardize_sample(Sample s, int64_t h, int64_t w) {
    if (s.image.shape().dim(1) == h && s.image.shape().dim(2) == w) return s;
    s.image = resize_bilinear(s.image, h, w);
    s.mask = resize_nearest(s.mask, h, w);
    for (auto& v : s.mask.mutable_data()) v = v >= 0.5f ? 1.0f : 0.0f;
    return s;
}

/// Stacks (C,H,W) sample images into an (N,C,H,W) batch.
inline Tensor<float> stack_images(const std::vector<Sample>& samples) {
    if (samples.empty()) throw data_error("stack_images: empty batch");
    const auto& s0 = samples.front().image.shape();
    std::vector<float> data;
    data.reserve(static_cast<size_t>(s0.numel()) * samples.size());
    for (const auto& s : samples) {
        if (s.image.shape() != s0) throw shape_error("stack_images: inhomogeneous batch");
        data.insert(data.end(), s.image.data().begin(), s.image.data().end());
    }
    return Tensor<float>::from_values(
        Shape({static_cast<int64_t>(samples.size()), s0.dim(0), s0.dim(1), s0.dim(2)}),
        std::move(data));
}

inline Tensor<float> stack_masks(const std::vector<Sample>& samples) {
    if (samples.empty()) throw data_error("stack_masks: empty batch");
    const auto& s0 = samples.front().mask.shape();
    std::vector<float> data;
    data.reserve(static_cast<size_t>(s0.numel()) * samples.size());
    for (const auto& s : samples) {
        if (s.mask.shape() != s0) throw shape_error("stack_masks: inhomogeneous batch");
        data.insert(data.end(), s.mask.data().begin(), s.mask.data().end());
    }
    return Tensor<float>::from_values(
        Shape({static_cast<int64_t>(samples.size()), s0.dim(0), s0.dim(1), s0.dim(2)}),
        std::move(data));
}

}  // namespace dpe
