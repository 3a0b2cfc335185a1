#pragma once

#include <stdexcept>
#include <string>

namespace facekit {

// Bad user-supplied configuration (schemas, remap tables, experiment files).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent data (manifests, labels, shapes).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem problems: missing files, unwritable outputs, held locks.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are contractual (forward passes, losses).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace facekit
