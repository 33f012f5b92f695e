#pragma once

#include <stdexcept>
#include <string>

namespace dpe {

// Error categories map 1:1 onto CLI exit codes and the "error:<category>:"
// prefix printed on stderr.
enum class ErrorKind {
    usage = 2,
    config = 3,
    io = 4,
    format = 5,
    shape = 6,
    numeric = 7,
    data = 8,
    internal = 9,
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::shape: return "shape";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::data: return "data";
        case ErrorKind::internal: return "internal";
    }
    return "internal";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }
    const char* category() const { return error_kind_name(kind_); }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error shape_error(const std::string& msg) { return Error(ErrorKind::shape, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::numeric, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::io, msg); }
inline Error format_error(const std::string& msg) { return Error(ErrorKind::format, msg); }
inline Error config_error(const std::string& msg) { return Error(ErrorKind::config, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::data, msg); }
inline Error usage_error(const std::string& msg) { return Error(ErrorKind::usage, msg); }

}  // namespace dpe
