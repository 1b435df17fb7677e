#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "satweight/eval.hpp"
#include "satweight/lstm.hpp"
#include "satweight/synth.hpp"
#include "satweight/train.hpp"

namespace satweight {

struct ModelShape {
  std::size_t hidden_size = 64;
  std::size_t layers = 1;
  std::size_t pad_to = 12;

  ModelDims dims() const { return {pad_to, hidden_size, layers, pad_to}; }
};

struct SweepSpec {
  std::vector<double> fractions = {0.03, 0.06, 0.09};
  bool retrain = false;
};

struct ReportSpec {
  EllipseStudyConfig study;
  std::vector<Strategy> strategies = all_strategies();
};

/// Everything a command needs; parsed from a preset merged with an optional
/// user file.
struct RunConfig {
  GenConfig gen;
  ModelShape model;
  TrainConfig train;
  BenchmarkConfig eval;
  SweepSpec sweep;
  ReportSpec report;

  void validate() const;
};

/// Names of the presets compiled into the binary.
std::vector<std::string> preset_names();
nlohmann::json preset_json(const std::string& name);

/// Strict conversion: every field required, unknown keys rejected. Errors are
/// category `config` and name the offending field path.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

/// Preset (the file's "base" key, else `preset`, else "desk") with the file
/// applied as a JSON merge patch. Parse errors report line and column.
RunConfig load_run_config(const std::optional<std::string>& preset, const std::optional<std::filesystem::path>& file);

}  // namespace satweight
