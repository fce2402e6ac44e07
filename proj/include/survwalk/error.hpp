#pragma once

#include <stdexcept>
#include <string>

namespace survwalk {

enum class ErrorKind {
    invalid_argument,  // caller passed something unusable (shapes, ranges, flags)
    data_format,       // file contents are malformed or inconsistent
    io,                // filesystem failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_invalid(const std::string& msg) {
    throw Error(ErrorKind::invalid_argument, msg);
}

[[noreturn]] inline void fail_data(const std::string& msg) {
    throw Error(ErrorKind::data_format, msg);
}

[[noreturn]] inline void fail_io(const std::string& msg) {
    throw Error(ErrorKind::io, msg);
}

}  // namespace survwalk
