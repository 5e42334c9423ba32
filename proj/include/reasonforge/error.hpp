#pragma once

#include <stdexcept>
#include <string>

namespace reasonforge {

/// Bad inputs and broken invariants: malformed files, dangling ids,
/// violated preconditions. Maps to exit code 1 at the CLI boundary.
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Remote-endpoint failures that survived (or bypassed) the retry policy.
/// Maps to exit code 2 at the CLI boundary.
class service_error : public std::runtime_error {
 public:
  explicit service_error(const std::string& what, int status = 0)
      : std::runtime_error(what), status_(status) {}

  /// Last HTTP status seen, or 0 for transport-level failures.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace reasonforge
