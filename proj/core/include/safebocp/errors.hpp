#pragma once

#include <stdexcept>
#include <string>

namespace safebocp {

// Invalid user-supplied configuration or arguments.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or unusable input data (ratings files, grids, ...).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure that survived every recovery attempt (e.g. the jitter ladder).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace safebocp
