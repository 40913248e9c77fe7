#pragma once

#include <stdexcept>
#include <string>

namespace alm {

// Error taxonomy mapped onto CLI exit codes: config 2, data 3, model 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelError : std::runtime_error {
    explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/domain violations inside the math core.
struct ShapeError : ModelError {
    explicit ShapeError(const std::string& msg) : ModelError(msg) {}
};

}  // namespace alm
