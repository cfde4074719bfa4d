#pragma once

#include <stdexcept>
#include <string>

namespace pmf {

/// Base class for all library errors. Catching this is enough to map any
/// failure to a CLI exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input text (CSV rows, config files, checkpoints).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Data violates a documented invariant (ordering, OHLC consistency, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Tensor/matrix operands do not conform.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Not enough rows/bars for the requested window or warm-up.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Bad configuration value or option combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Model fitting failed (non-finite inputs, degenerate problem).
class FitError : public Error {
public:
    using Error::Error;
};

/// Numeric failure at runtime (divergence, non-finite loss, domain breach).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem problem (missing file, unwritable output).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace pmf
