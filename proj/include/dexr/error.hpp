#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dexr {

/// Base of every exception thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the named operation.
class shape_error : public error {
public:
    using error::error;
};

/// Argument outside the mathematical domain of an operation (log of 0, ...).
class domain_error : public error {
public:
    using error::error;
};

/// Malformed input file or document. `line()` is 1-based, 0 when unknown.
class parse_error : public error {
public:
    parse_error(const std::string& what, std::size_t line = 0)
        : error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A record, configuration or argument violates a documented invariant.
class validation_error : public error {
public:
    using error::error;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

}  // namespace dexr
