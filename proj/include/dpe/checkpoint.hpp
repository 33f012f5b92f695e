#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "dpe/config.hpp"
#include "dpe/net.hpp"
#include "dpe/tensor_io.hpp"

namespace dpe {

// Checkpoint container: magic "DPEC", version 1, then three length-prefixed
// sections (u32 little-endian byte count each):
//   1. config text (canonical key-value block including the init seed)
//   2. manifest text, one "<name> <d0> <d1> ..." line per tensor
//   3. concatenated DPET tensor records in manifest order
// Parameters and BN running statistics all round trip bit-exactly.

namespace detail {

inline std::string manifest_text(Network<float>& net) {
    std::ostringstream os;
    for (const auto& nt : named_tensors(net)) {
        os << nt.name;
        for (int i = 0; i < nt.tensor->shape().rank(); ++i) os << ' ' << nt.tensor->shape().dim(i);
        os << '\n';
    }
    return os.str();
}

inline void put_section(std::ostream& os, const std::string& bytes) {
    put_u32_le(os, static_cast<uint32_t>(bytes.size()));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string get_section(std::istream& is) {
    const uint32_t len = get_u32_le(is, "checkpoint");
    std::string bytes(len, '\0');
    if (!is.read(bytes.data(), static_cast<std::streamsize>(len))) {
        throw format_error("checkpoint: truncated section");
    }
    return bytes;
}

}  // namespace detail

inline void save_checkpoint(Network<float>& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    os.write("DPEC", 4);
    os.put(1);
    detail::put_section(os, net_config_to_text(net.cfg, net.seed));
    detail::put_section(os, detail::manifest_text(net));
    std::ostringstream blob(std::ios::binary);
    for (const auto& nt : named_tensors(net)) write_tensor(blob, *nt.tensor);
    detail::put_section(os, blob.str());
    if (!os) throw io_error("failed writing checkpoint '" + path + "'");
}

inline Network<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open checkpoint '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "DPEC") {
        throw format_error("checkpoint: bad magic (expected DPEC)");
    }
    if (is.get() != 1) throw format_error("checkpoint: unsupported version");

    const std::string config_text = detail::get_section(is);
    const std::string manifest = detail::get_section(is);
    const std::string blob = detail::get_section(is);

    auto [cfg, seed] = net_config_from_text(config_text);
    Network<float> net = build_network<float>(cfg, seed);

    if (manifest != detail::manifest_text(net)) {
        // Point at the first differing manifest line so the mismatched
        // parameter is named in the error.
        std::istringstream stored(manifest), built(detail::manifest_text(net));
        std::string sline, bline;
        while (true) {
            const bool s_ok = static_cast<bool>(std::getline(stored, sline));
            const bool b_ok = static_cast<bool>(std::getline(built, bline));
            if (!s_ok || !b_ok || sline != bline) {
                throw shape_error("checkpoint: manifest mismatch at parameter '" +
                                  (s_ok ? sline : std::string("<missing>")) + "' vs expected '" +
                                  (b_ok ? bline : std::string("<missing>")) + "'");
            }
        }
    }

    std::istringstream bs(blob, std::ios::binary);
    for (auto& nt : named_tensors(net)) {
        Tensor<float> stored = read_tensor(bs);
        if (stored.shape() != nt.tensor->shape()) {
            throw shape_error("checkpoint: tensor '" + nt.name + "' has shape " +
                              stored.shape().to_string() + ", expected " +
                              nt.tensor->shape().to_string());
        }
        nt.tensor->mutable_data() = stored.data();
    }
    if (bs.peek() != EOF) throw format_error("checkpoint: trailing bytes after tensor blob");
    return net;
}

}  // namespace dpe
