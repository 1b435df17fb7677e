#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "satweight/config.hpp"
#include "satweight/errors.hpp"

namespace satweight {

inline constexpr const char* kToolVersion = "0.3.0";

struct CommandOptions {
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;  // overrides gen, train and report seeds
  std::filesystem::path out = ".";
  int threads = 0;  // 0: OpenMP default
  bool deterministic = false;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> model;
  std::optional<std::vector<std::string>> strategies;
  std::optional<std::vector<double>> fractions;
  bool retrain = false;
  std::optional<std::size_t> trials;
  bool quiet = false;
};

RunConfig resolve_config(const CommandOptions& options);

// Each command writes its outputs plus manifest.json under options.out and
// returns the manifest.

/// dataset.jsonl with split tags.
nlohmann::json cmd_gen(const CommandOptions& options);
/// model.bin and training_log.jsonl from the dataset's train/validation splits.
nlohmann::json cmd_train(const CommandOptions& options);
/// records.csv, cdf_<strategy>.csv and summary.json on the test split.
nlohmann::json cmd_eval(const CommandOptions& options);
/// sweep.csv plus one report directory per biased fraction.
nlohmann::json cmd_sweep(const CommandOptions& options);
/// ellipses.csv and report.json on the canonical geometry.
nlohmann::json cmd_report(const CommandOptions& options);

int exit_code(ErrorCategory category);

}  // namespace satweight
