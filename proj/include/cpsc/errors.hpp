#pragma once

#include <stdexcept>
#include <string>

namespace cpsc {

// Error taxonomy shared by the library and the CLI exit-code mapping.

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct IndexError : std::runtime_error {
    explicit IndexError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct CalibrationError : std::runtime_error {
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct StatisticsError : std::runtime_error {
    explicit StatisticsError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cpsc
