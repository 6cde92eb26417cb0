#pragma once

#include <stdexcept>
#include <string>

namespace groupreg {

/// Shape or extent mismatch between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid configuration value or precondition on user-supplied settings.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent on-disk data (manifests, rasters, missing files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad magic/version in a binary file.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// CRC mismatch or truncated binary file.
class ChecksumError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite values where finite ones are required (NaN loss, Inf field).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace groupreg
