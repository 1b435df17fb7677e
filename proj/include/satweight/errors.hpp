#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace satweight {

enum class ErrorCategory {
  invalid_argument,
  degenerate_geometry,
  rank_deficient,
  missing_truth,
  config,
  io,
  corrupt_file,
  version_mismatch,
  divergence,
};

constexpr std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::degenerate_geometry: return "degenerate_geometry";
    case ErrorCategory::rank_deficient: return "rank_deficient";
    case ErrorCategory::missing_truth: return "missing_truth";
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::corrupt_file: return "corrupt_file";
    case ErrorCategory::version_mismatch: return "version_mismatch";
    case ErrorCategory::divergence: return "divergence";
  }
  return "unknown";
}

/// Library-wide exception; the category drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace satweight
