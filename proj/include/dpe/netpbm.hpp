#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "dpe/tensor.hpp"

namespace dpe {

// Binary netpbm I/O: PGM (P5) for masks, PPM (P6) for images, maxval 255.
// Values are scaled to [0,1] on read and quantized with round(v*255) on
// write, so a write/read/write cycle of quantized data is byte-identical.

namespace detail {

inline int pnm_next_token(std::istream& is, const char* context) {
    // Skips whitespace and '#' comment lines, then reads one unsigned value.
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (std::isspace(c)) {
            c = is.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) {
        throw format_error(std::string(context) + ": malformed header");
    }
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        if (value > 1 << 28) throw format_error(std::string(context) + ": header value too large");
        c = is.get();
    }
    if (c != EOF) is.unget();
    return value;
}

inline std::vector<uint8_t> pnm_read_payload(std::istream& is, size_t n, const char* context) {
    is.get();  // the single whitespace byte after maxval
    std::vector<uint8_t> bytes(n);
    if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n))) {
        throw format_error(std::string(context) + ": truncated payload");
    }
    return bytes;
}

inline uint8_t quantize_byte(float v, const char* context) {
    if (!(v >= 0.0f && v <= 1.0f)) {
        throw data_error(std::string(context) + ": values must lie in [0, 1]");
    }
    return static_cast<uint8_t>(std::lround(v * 255.0f));
}

}  // namespace detail

/// Writes a (1,H,W) tensor as binary PGM.
inline void write_pgm(const std::string& path, const Tensor<float>& mask) {
    if (mask.shape().rank() != 3 || mask.shape().dim(0) != 1) {
        throw shape_error("write_pgm: expected shape (1,H,W), got " + mask.shape().to_string());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    const int64_t h = mask.shape().dim(1), w = mask.shape().dim(2);
    os << "P5\n" << w << " " << h << "\n255\n";
    for (float v : mask.data()) os.put(static_cast<char>(detail::quantize_byte(v, "write_pgm")));
    if (!os) throw io_error("failed writing '" + path + "'");
}

inline Tensor<float> read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "' for reading");
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '5') throw format_error("read_pgm: expected P5 magic");
    const int w = detail::pnm_next_token(is, "read_pgm");
    const int h = detail::pnm_next_token(is, "read_pgm");
    const int maxval = detail::pnm_next_token(is, "read_pgm");
    if (maxval != 255) throw format_error("read_pgm: unsupported maxval (only 255)");
    auto bytes = detail::pnm_read_payload(is, static_cast<size_t>(w) * h, "read_pgm");
    std::vector<float> data(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) data[i] = static_cast<float>(bytes[i]) / 255.0f;
    return Tensor<float>::from_values(Shape({1, h, w}), std::move(data));
}

/// Writes a (3,H,W) tensor as binary PPM (planar -> interleaved RGB).
inline void write_ppm(const std::string& path, const Tensor<float>& img) {
    if (img.shape().rank() != 3 || img.shape().dim(0) != 3) {
        throw shape_error("write_ppm: expected shape (3,H,W), got " + img.shape().to_string());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    const int64_t h = img.shape().dim(1), w = img.shape().dim(2);
    os << "P6\n" << w << " " << h << "\n255\n";
    const float* d = img.data().data();
    const int64_t plane = h * w;
    for (int64_t i = 0; i < plane; ++i) {
        for (int64_t c = 0; c < 3; ++c) {
            os.put(static_cast<char>(detail::quantize_byte(d[c * plane + i], "write_ppm")));
        }
    }
    if (!os) throw io_error("failed writing '" + path + "'");
}

inline Tensor<float> read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "' for reading");
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '6') throw format_error("read_ppm: expected P6 magic");
    const int w = detail::pnm_next_token(is, "read_ppm");
    const int h = detail::pnm_next_token(is, "read_ppm");
    const int maxval = detail::pnm_next_token(is, "read_ppm");
    if (maxval != 255) throw format_error("read_ppm: unsupported maxval (only 255)");
    auto bytes = detail::pnm_read_payload(is, static_cast<size_t>(w) * h * 3, "read_ppm");
    const int64_t plane = static_cast<int64_t>(w) * h;
    std::vector<float> data(static_cast<size_t>(plane) * 3);
    for (int64_t i = 0; i < plane; ++i) {
        for (int64_t c = 0; c < 3; ++c) {
            data[static_cast<size_t>(c * plane + i)] =
                static_cast<float>(bytes[static_cast<size_t>(3 * i + c)]) / 255.0f;
        }
    }
    return Tensor<float>::from_values(Shape({3, h, w}), std::move(data));
}

}  // namespace dpe
