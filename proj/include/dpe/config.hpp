#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dpe/net.hpp"
#include "dpe/train.hpp"

namespace dpe {

// UTF-8 "key = value" configuration text, one pair per line, '#' comments.
// Unknown keys are an error so typos never pass silently.

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected integer, got '" + v + "'");
    }
}

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw config_error("key '" + key + "': expected true|false, got '" + v + "'");
}

inline std::vector<int64_t> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
    if (out.empty()) throw config_error("key '" + key + "': empty list");
    return out;
}

}  // namespace detail

/// Parsed key-value pairs in file order. Duplicate keys are an error.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(
    const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::unordered_set<std::string> seen;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw config_error("line " + std::to_string(lineno) + ": empty key");
        if (!seen.insert(key).second) throw config_error("duplicate key '" + key + "'");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

/// Canonical serialization of a network configuration plus its init seed;
/// parse(serialize(x)) == x and the byte stream is deterministic, which is
/// what makes checkpoint round trips exact.
inline std::string net_config_to_text(const NetConfig& cfg, uint64_t seed) {
    std::ostringstream os;
    os << "variant = " << to_string(cfg.variant) << "\n";
    os << "widths = ";
    for (size_t i = 0; i < cfg.stage_widths.size(); ++i) {
        if (i) os << ',';
        os << cfg.stage_widths[i];
    }
    os << "\n";
    os << "blocks_per_stage = " << cfg.blocks_per_stage << "\n";
    os << "input_channels = " << cfg.input_channels << "\n";
    os << "height = " << cfg.input_h << "\n";
    os << "width = " << cfg.input_w << "\n";
    os << "seed = " << seed << "\n";
    return os.str();
}

inline std::pair<NetConfig, uint64_t> net_config_from_text(const std::string& text) {
    NetConfig cfg;
    uint64_t seed = 0;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "variant") cfg.variant = parse_variant(value);
        else if (key == "widths") cfg.stage_widths = detail::parse_int_list(key, value);
        else if (key == "blocks_per_stage") cfg.blocks_per_stage = detail::parse_int(key, value);
        else if (key == "input_channels") cfg.input_channels = detail::parse_int(key, value);
        else if (key == "height") cfg.input_h = detail::parse_int(key, value);
        else if (key == "width") cfg.input_w = detail::parse_int(key, value);
        else if (key == "seed") seed = detail::parse_u64(key, value);
        else throw config_error("unknown key '" + key + "'");
    }
    cfg.validate();
    return {cfg, seed};
}

/// Everything a run needs: network and training settings plus paths. This is
/// the schema of the --config file; command-line flags override these values.
struct RunConfig {
    NetConfig net;
    TrainConfig train;
    std::string data_dir;
    std::string out_path;
    std::string log_path;
};

inline RunConfig run_config_from_text(const std::string& text) {
    RunConfig rc;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "variant") rc.net.variant = parse_variant(value);
        else if (key == "widths") rc.net.stage_widths = detail::parse_int_list(key, value);
        else if (key == "blocks_per_stage") rc.net.blocks_per_stage = detail::parse_int(key, value);
        else if (key == "input_channels") rc.net.input_channels = detail::parse_int(key, value);
        else if (key == "height") rc.net.input_h = detail::parse_int(key, value);
        else if (key == "width") rc.net.input_w = detail::parse_int(key, value);
        else if (key == "epochs") rc.train.epochs = detail::parse_int(key, value);
        else if (key == "batch_size") rc.train.batch_size = detail::parse_int(key, value);
        else if (key == "lr") rc.train.lr = detail::parse_double(key, value);
        else if (key == "momentum") rc.train.momentum = detail::parse_double(key, value);
        else if (key == "seed") rc.train.seed = detail::parse_u64(key, value);
        else if (key == "shuffle") rc.train.shuffle = detail::parse_bool(key, value);
        else if (key == "eval_every") rc.train.eval_every = detail::parse_int(key, value);
        else if (key == "threshold") rc.train.threshold = detail::parse_double(key, value);
        else if (key == "data") rc.data_dir = value;
        else if (key == "out") rc.out_path = value;
        else if (key == "log") rc.log_path = value;
        else throw config_error("unknown key '" + key + "'");
    }
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return run_config_from_text(ss.str());
}

}  // namespace dpe
