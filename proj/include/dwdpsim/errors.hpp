// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dwdpsim {

// Invalid user-supplied configuration (bad field values, malformed files).
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A broken internal invariant: a bug, not a user error. Exit code 3.
class InvariantViolation : public std::logic_error {
 public:
  explicit InvariantViolation(const std::string& msg) : std::logic_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

inline void check_invariant(bool cond, const std::string& msg) {
  if (!cond) throw InvariantViolation(msg);
}

}  // namespace dwdpsim
