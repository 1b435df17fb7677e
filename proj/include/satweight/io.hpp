#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "satweight/lstm.hpp"
#include "satweight/synth.hpp"

namespace satweight {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Lowercase hex SHA-256 of a file's bytes / of a byte string.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

nlohmann::json to_json(const GenConfig& config);
GenConfig gen_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LabeledEpoch& record);
LabeledEpoch labeled_epoch_from_json(const nlohmann::json& j);

struct Dataset {
  GenConfig config;
  std::vector<LabeledEpoch> records;
};

/// JSON Lines: a header record (format, version, generator config) followed
/// by one record per epoch. Doubles are written in shortest round-trip form.
void write_dataset(const std::filesystem::path& path, const GenConfig& config, std::span<const LabeledEpoch> records);
Dataset read_dataset(const std::filesystem::path& path);

/// Records carrying the given split tag, in file order.
std::vector<LabeledEpoch> select_split(const Dataset& dataset, SplitTag tag);

/// Little-endian binary model file with version tag, dimensions,
/// preprocessing metadata and a SHA-256 trailer over everything before it.
void save_model(const std::filesystem::path& path, const LstmModel& model);
LstmModel load_model(const std::filesystem::path& path);

}  // namespace satweight
