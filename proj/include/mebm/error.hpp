#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mebm {

// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape mismatches, bad arguments, mode/head mismatches, unknown config keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated input files, empty datasets, non-finite data.
class DataError : public Error {
public:
    using Error::Error;
};

// A broken internal contract (e.g. an augmented batch reaching the likelihood term).
class InvariantError : public Error {
public:
    using Error::Error;
};

// Non-finite energies/gradients or an exploding energy gap.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::int64_t iteration, double value)
        : Error(what), iteration_(iteration), value_(value) {}

    std::int64_t iteration() const noexcept { return iteration_; }
    double value() const noexcept { return value_; }

private:
    std::int64_t iteration_;
    double value_;
};

}  // namespace mebm
