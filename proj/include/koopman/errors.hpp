#pragma once

#include <stdexcept>
#include <string>

namespace koopman {

/// Bad user-facing configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A trajectory left the admissible region during integration (CLI exit code 3).
struct TrajectoryEscapeError : std::runtime_error {
    explicit TrajectoryEscapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A full-column-rank precondition failed (CLI exit code 4).
struct RankPreconditionError : std::runtime_error {
    explicit RankPreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed numeric input (NaN/Inf entries, shape mismatches).
struct InputError : std::invalid_argument {
    explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace koopman
