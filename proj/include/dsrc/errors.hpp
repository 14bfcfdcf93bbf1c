#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dsrc {

// Dimension or precondition violation on a public operation.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A matrix that was required to be symmetric positive-definite is not.
// pivot_index is the first Cholesky pivot that failed.
class NotSpdError : public std::runtime_error {
public:
    NotSpdError(const std::string& msg, std::size_t pivot_index)
        : std::runtime_error(msg), pivot_index(pivot_index) {}
    std::size_t pivot_index;
};

// On-disk data failed validation; byte_offset points at the first bad byte.
class CorruptError : public std::runtime_error {
public:
    CorruptError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg), byte_offset(byte_offset) {}
    std::size_t byte_offset;
};

// A solver could not continue; step is the time index where it halted.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& msg, std::size_t step)
        : std::runtime_error(msg), step(step) {}
    std::size_t step;
};

}  // namespace dsrc
