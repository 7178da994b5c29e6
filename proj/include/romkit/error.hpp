#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace romkit {

enum class ErrorCategory {
  contract_violation,
  configuration,
  numerical_domain,
  integration_blowup,
  steady_state_failure,
  numerical,
  divergence,
  filter_divergence,
  singular_update,
  missing_artifact,
  io,
};

/// Stable machine-readable name, e.g. "contract_violation".
std::string_view category_name(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCategory::contract_violation, message);
}

}  // namespace romkit
