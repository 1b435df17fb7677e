#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "satweight/geo.hpp"
#include "satweight/parallel.hpp"
#include "satweight/residual_matrix.hpp"
#include "satweight/wls.hpp"

namespace satweight {

/// Gaussian / exponential pseudo-range error mixture. alpha is the probability
/// of the Gaussian branch.
struct MixtureParams {
  double alpha = 0.91;
  double mu = 0.0;       // m
  double sigma = 3.0;    // m
  double lambda = 0.02;  // 1/m

  void validate() const;
  bool operator==(const MixtureParams&) const = default;
};

struct SatelliteCountRange {
  std::size_t min = 12;
  std::size_t max = 12;
  bool operator==(const SatelliteCountRange&) const = default;
};

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;

  void validate() const;
  bool operator==(const SplitFractions&) const = default;
};

struct GenConfig {
  std::size_t epochs = 5000;
  SatelliteCountRange n_satellites;
  double biased_fraction = 0.09;  // probability a satellite's error comes from the exponential branch
  MixtureParams mixture;
  std::uint64_t seed = 1;
  double orbit_radius = 26'560'000.0;          // m
  double min_elevation = 10.0 * kPi / 180.0;  // rad
  double gamma = kDefaultGamma;
  double clip = kDefaultClip;
  SplitFractions split;
  std::uint64_t split_seed = 7;

  void validate() const;
  bool operator==(const GenConfig&) const = default;
};

enum class SplitTag { unassigned, train, validation, test };

std::string_view to_string(SplitTag tag);
SplitTag split_tag_from_string(std::string_view name);

struct LabeledEpoch {
  std::uint64_t epoch_id = 0;
  Epoch epoch;
  ResidualMatrix residual_matrix;  // raw meters, diagonal = gamma
  WeightVector labels;
  SplitTag split = SplitTag::unassigned;
};

/// Residual magnitudes below this are floored before inversion, capping labels at 1e4.
inline constexpr double kLabelResidualFloor = 0.01;

/// 1 / max(|residual|, floor)^2.
double label_weight(double residual);

/// Labels of every channel against epoch.truth_state. Throws missing_truth.
WeightVector truth_label_weights(const Epoch& epoch);

/// Draws from N(mu, sigma^2) when is_biased is false, from Exp(lambda) otherwise.
double sample_mixture(const MixtureParams& params, bool is_biased, std::mt19937_64& rng);

/// Marginal draw: the branch is Gaussian with probability alpha.
double sample_mixture_marginal(const MixtureParams& params, std::mt19937_64& rng, bool* biased = nullptr);

/// Independent generator for epoch `index` of a dataset seeded with `seed`.
std::mt19937_64 epoch_stream(std::uint64_t seed, std::uint64_t index);

/// One synthetic epoch with truth, realized errors, labels and residual matrix.
/// Geometries whose leave-one-out solves fail are redrawn from the same stream.
LabeledEpoch generate_epoch(const GenConfig& config, std::mt19937_64& rng, const SolverConfig& solver = {});

/// config.epochs epochs; epoch i uses epoch_stream(config.seed, i), so the
/// output does not depend on the thread count.
std::vector<LabeledEpoch> generate_dataset(const GenConfig& config, Execution exec = Execution::parallel,
                                           const SolverConfig& solver = {});

struct DatasetSplit {
  std::vector<LabeledEpoch> train;
  std::vector<LabeledEpoch> validation;
  std::vector<LabeledEpoch> test;
};

/// Seeded shuffle then cut into train/validation/test; members carry their tag.
DatasetSplit split_dataset(std::vector<LabeledEpoch> data, const SplitFractions& fractions, std::uint64_t seed);

/// Writes split tags in place, keeping the input order.
void assign_split_tags(std::vector<LabeledEpoch>& data, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace satweight
