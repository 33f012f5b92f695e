#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dpe/tensor.hpp"

namespace dpe {

// Binary tensor record: magic "DPET", version 1, dtype code (0 = f32),
// rank byte, rank x u32 little-endian extents, row-major little-endian
// payload. Round trips are bit-exact.

namespace detail {

inline void put_u32_le(std::ostream& os, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline uint32_t get_u32_le(std::istream& is, const char* context) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw format_error(std::string(context) + ": truncated file");
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32_le(std::ostream& os, float v) {
    put_u32_le(os, std::bit_cast<uint32_t>(v));
}

inline float get_f32_le(std::istream& is, const char* context) {
    return std::bit_cast<float>(get_u32_le(is, context));
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor<float>& t) {
    os.write("DPET", 4);
    os.put(1);  // version
    os.put(0);  // dtype: f32
    os.put(static_cast<char>(t.shape().rank()));
    for (int i = 0; i < t.shape().rank(); ++i) {
        detail::put_u32_le(os, static_cast<uint32_t>(t.shape().dim(i)));
    }
    for (float v : t.data()) detail::put_f32_le(os, v);
    if (!os) throw io_error("failed writing tensor record");
}

inline Tensor<float> read_tensor(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "DPET") {
        throw format_error("tensor record: bad magic (expected DPET)");
    }
    const int version = is.get(), dtype = is.get(), rank = is.get();
    if (version != 1) throw format_error("tensor record: unsupported version");
    if (dtype != 0) throw format_error("tensor record: unsupported dtype code");
    if (rank < 0 || rank > Shape::kMaxRank) throw format_error("tensor record: bad rank");
    std::vector<int64_t> dims(static_cast<size_t>(rank));
    for (auto& d : dims) d = detail::get_u32_le(is, "tensor record");
    Shape shape(std::move(dims));
    std::vector<float> data(static_cast<size_t>(shape.numel()));
    for (auto& v : data) v = detail::get_f32_le(is, "tensor record");
    return Tensor<float>::from_values(std::move(shape), std::move(data));
}

inline void write_tensor_file(const std::string& path, const Tensor<float>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    write_tensor(os, t);
}

inline Tensor<float> read_tensor_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "' for reading");
    return read_tensor(is);
}

}  // namespace dpe
