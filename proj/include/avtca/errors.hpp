#pragma once

#include <stdexcept>
#include <string>

namespace avtca {

// Base class for every error the library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents do not line up (op-level, carries both shapes).
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

// A configuration value is inconsistent (head counts, filter counts, rates).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// Dataset or label content is malformed.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error("data error: " + msg) {}
};

// A reverse-mode gradient disagreed with the finite-difference oracle.
struct GradCheckFailure : Error {
    explicit GradCheckFailure(const std::string& msg) : Error("gradcheck failure: " + msg) {}
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error("divergence: " + msg) {}
};

}  // namespace avtca
