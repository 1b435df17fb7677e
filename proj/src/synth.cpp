#include "satweight/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "satweight/errors.hpp"

namespace satweight {

void MixtureParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0) || !std::isfinite(mu) || !(sigma > 0.0) || !(lambda > 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "mixture parameters need 0<=alpha<=1, sigma>0, lambda>0");
  }
}

void SplitFractions::validate() const {
  if (!(train > 0.0) || !(validation > 0.0) || !(test > 0.0) ||
      std::abs(train + validation + test - 1.0) > 1e-9) {
    throw Error(ErrorCategory::invalid_argument, "split fractions must be positive and sum to 1");
  }
}

void GenConfig::validate() const {
  mixture.validate();
  split.validate();
  if (epochs < 1) throw Error(ErrorCategory::invalid_argument, "epochs must be >= 1");
  if (n_satellites.min < kMinEpochSatellites || n_satellites.max < n_satellites.min) {
    throw Error(ErrorCategory::invalid_argument, "n_satellites range must satisfy 5 <= min <= max");
  }
  if (!(biased_fraction >= 0.0 && biased_fraction <= 1.0)) {
    throw Error(ErrorCategory::invalid_argument, "biased_fraction must lie in [0, 1]");
  }
  if (!(orbit_radius > wgs84::kSemiMajorAxis)) {
    throw Error(ErrorCategory::invalid_argument, "orbit radius must exceed the Earth radius");
  }
  if (!(min_elevation >= 0.0 && min_elevation < kPi / 2)) {
    throw Error(ErrorCategory::invalid_argument, "min_elevation must lie in [0, pi/2)");
  }
  if (!(gamma > 0.0) || !(clip > 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "gamma and clip must be positive");
  }
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
    case SplitTag::unassigned: break;
  }
  return "unassigned";
}

SplitTag split_tag_from_string(std::string_view name) {
  if (name == "train") return SplitTag::train;
  if (name == "validation") return SplitTag::validation;
  if (name == "test") return SplitTag::test;
  if (name == "unassigned") return SplitTag::unassigned;
  throw Error(ErrorCategory::invalid_argument, "unknown split tag '" + std::string(name) + "'");
}

double label_weight(double residual) {
  const double r = std::max(std::abs(residual), kLabelResidualFloor);
  return 1.0 / (r * r);
}

WeightVector truth_label_weights(const Epoch& epoch) {
  if (!epoch.truth_state) {
    throw Error(ErrorCategory::missing_truth, "epoch has no truth state");
  }
  WeightVector w(epoch.size(), 0.0);
  for (std::size_t i = 0; i < epoch.size(); ++i) {
    const auto& ch = epoch.channels[i];
    w[i] = label_weight(pseudo_range_residual(ch.pseudo_range, *epoch.truth_state, ch.position));
  }
  return w;
}

double sample_mixture(const MixtureParams& params, bool is_biased, std::mt19937_64& rng) {
  if (is_biased) {
    return std::exponential_distribution<double>(params.lambda)(rng);
  }
  return std::normal_distribution<double>(params.mu, params.sigma)(rng);
}

double sample_mixture_marginal(const MixtureParams& params, std::mt19937_64& rng, bool* biased) {
  const bool outlier = !std::bernoulli_distribution(params.alpha)(rng);
  if (biased) *biased = outlier;
  return sample_mixture(params, outlier, rng);
}

std::mt19937_64 epoch_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5a7u};
  return std::mt19937_64(seq);
}

namespace {

constexpr int kMaxGeometryRedraws = 64;

Epoch draw_epoch(const GenConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Epoch epoch;

  const Geodetic site{std::asin(2.0 * unit(rng) - 1.0), 2.0 * kPi * unit(rng) - kPi, 0.0};
  const NavState truth{geodetic_to_ecef(site), (2.0 * unit(rng) - 1.0) * 1e-3};
  epoch.truth_state = truth;

  const std::size_t n = std::uniform_int_distribution<std::size_t>(config.n_satellites.min,
                                                                    config.n_satellites.max)(rng);
  const Eigen::Matrix3d to_ecef = enu_rotation(truth.position).transpose();
  const Eigen::Vector3d p = truth.position.vec();
  std::bernoulli_distribution outlier(config.biased_fraction);
  std::normal_distribution<double> gauss(0.0, 1.0);

  epoch.channels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double azimuth = 2.0 * kPi * unit(rng);
    const double elevation = config.min_elevation + (kPi / 2 - config.min_elevation) * unit(rng);
    const Eigen::Vector3d enu{std::cos(elevation) * std::sin(azimuth), std::cos(elevation) * std::cos(azimuth),
                              std::sin(elevation)};
    const Eigen::Vector3d u = to_ecef * enu;
    // Distance along u from the receiver to the orbit sphere.
    const double pu = p.dot(u);
    const double range = -pu + std::sqrt(pu * pu - p.squaredNorm() + config.orbit_radius * config.orbit_radius);

    SatelliteChannel ch;
    ch.sat_id = static_cast<std::uint32_t>(i + 1);
    ch.position = EcefPosition::from(p + range * u);
    ch.elevation = elevation;
    ch.cn0 = std::max(0.0, 30.0 + 18.0 * std::sin(elevation) + 2.0 * gauss(rng));
    ch.acceleration = 0.2 * std::abs(gauss(rng));

    const bool biased = outlier(rng);
    const double error = sample_mixture(config.mixture, biased, rng);
    ch.pseudo_range = observation_function(truth, ch.position) + error;
    // Store the error as realized after rounding the pseudo-range.
    ch.truth = ChannelTruth{pseudo_range_residual(ch.pseudo_range, truth, ch.position), biased};
    epoch.channels.push_back(ch);
  }
  return epoch;
}

}  // namespace

LabeledEpoch generate_epoch(const GenConfig& config, std::mt19937_64& rng, const SolverConfig& solver) {
  config.validate();
  std::optional<Error> last;
  for (int attempt = 0; attempt < kMaxGeometryRedraws; ++attempt) {
    Epoch epoch = draw_epoch(config, rng);
    try {
      LabeledEpoch out;
      out.residual_matrix = build_residual_matrix_serial(epoch, solver, config.gamma);
      out.labels = truth_label_weights(epoch);
      out.epoch = std::move(epoch);
      return out;
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::degenerate_geometry && e.category() != ErrorCategory::rank_deficient) throw;
      last = e;
    }
  }
  throw Error(ErrorCategory::degenerate_geometry,
              std::string("could not draw a solvable geometry: ") + (last ? last->what() : ""));
}

std::vector<LabeledEpoch> generate_dataset(const GenConfig& config, Execution exec, const SolverConfig& solver) {
  config.validate();
  std::vector<LabeledEpoch> data(config.epochs);
  std::vector<std::optional<Error>> failures(config.epochs);
  const auto count = static_cast<long>(config.epochs);

  auto one = [&](long i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      auto rng = epoch_stream(config.seed, idx);
      data[idx] = generate_epoch(config, rng, solver);
      data[idx].epoch_id = idx;
    } catch (const Error& e) {
      failures[idx] = e;
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (long i = 0; i < count; ++i) one(i);
  } else {
    for (long i = 0; i < count; ++i) one(i);
  }
  for (const auto& f : failures) {
    if (f) throw *f;
  }
  return data;
}

namespace {

struct SplitSizes {
  std::size_t train, validation, test;
};

SplitSizes split_sizes(std::size_t n, const SplitFractions& f) {
  const auto train = std::min(n, static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n))));
  const auto validation =
      std::min(n - train, static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));
  return {train, validation, n - train - validation};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void assign_split_tags(std::vector<LabeledEpoch>& data, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  if (data.empty()) throw Error(ErrorCategory::invalid_argument, "cannot split an empty dataset");
  const SplitSizes sizes = split_sizes(data.size(), fractions);
  const auto order = shuffled_indices(data.size(), seed);
  for (std::size_t k = 0; k < order.size(); ++k) {
    data[order[k]].split = k < sizes.train                        ? SplitTag::train
                           : k < sizes.train + sizes.validation ? SplitTag::validation
                                                                 : SplitTag::test;
  }
}

DatasetSplit split_dataset(std::vector<LabeledEpoch> data, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  if (data.empty()) throw Error(ErrorCategory::invalid_argument, "cannot split an empty dataset");
  const SplitSizes sizes = split_sizes(data.size(), fractions);
  const auto order = shuffled_indices(data.size(), seed);
  DatasetSplit out;
  out.train.reserve(sizes.train);
  out.validation.reserve(sizes.validation);
  out.test.reserve(sizes.test);
  for (std::size_t k = 0; k < order.size(); ++k) {
    LabeledEpoch& e = data[order[k]];
    if (k < sizes.train) {
      e.split = SplitTag::train;
      out.train.push_back(std::move(e));
    } else if (k < sizes.train + sizes.validation) {
      e.split = SplitTag::validation;
      out.validation.push_back(std::move(e));
    } else {
      e.split = SplitTag::test;
      out.test.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace satweight
