#pragma once

#include <stdexcept>
#include <string>

namespace fastperm {

enum class ErrorCategory {
  parse_error = 2,
  dimension_mismatch = 3,
  non_finite_value = 4,
  invalid_config = 5,
  rank_too_high = 6,
  insufficient_samples = 7,
  insufficient_trials = 8,
  degenerate_labels = 9,
  io_error = 10,
  internal = 11,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::parse_error: return "parse_error";
    case ErrorCategory::dimension_mismatch: return "dimension_mismatch";
    case ErrorCategory::non_finite_value: return "non_finite_value";
    case ErrorCategory::invalid_config: return "invalid_config";
    case ErrorCategory::rank_too_high: return "rank_too_high";
    case ErrorCategory::insufficient_samples: return "insufficient_samples";
    case ErrorCategory::insufficient_trials: return "insufficient_trials";
    case ErrorCategory::degenerate_labels: return "degenerate_labels";
    case ErrorCategory::io_error: return "io_error";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

  // Process exit code for CLI error reporting.
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

}  // namespace fastperm
