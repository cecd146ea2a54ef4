#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cowpro {

// Error taxonomy. ValidationError covers bad shapes, bad arguments and bad
// config; IoError covers anything touching the filesystem. DegenerateSupport
// is recoverable: the caller resamples and retries.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct ConfigError : ValidationError {
    using ValidationError::ValidationError;
};

struct IoError : Error {
    using Error::Error;
};

struct DegenerateSupport : Error {
    using Error::Error;
};

using Shape = std::vector<int>;

inline std::int64_t numel_of(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace cowpro
