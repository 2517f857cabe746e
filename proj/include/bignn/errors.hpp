#pragma once

#include <stdexcept>
#include <string>

namespace bignn {

// Bad experiment configuration (grids, exponents, infeasible k). CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unusable input data (CSV parse failures, nonpositive regression values). CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bignn
