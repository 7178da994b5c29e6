#include "romkit/error.hpp"

namespace romkit {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::contract_violation: return "contract_violation";
    case ErrorCategory::configuration: return "configuration";
    case ErrorCategory::numerical_domain: return "numerical_domain";
    case ErrorCategory::integration_blowup: return "integration_blowup";
    case ErrorCategory::steady_state_failure: return "steady_state_failure";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::divergence: return "divergence";
    case ErrorCategory::filter_divergence: return "filter_divergence";
    case ErrorCategory::singular_update: return "singular_update";
    case ErrorCategory::missing_artifact: return "missing_artifact";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace romkit
