// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lstnet {

/// Invalid configuration value or command usage.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values, divergence, or a failed numeric contract.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix dimensions.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lstnet
