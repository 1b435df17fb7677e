#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "satweight/geo.hpp"
#include "satweight/lstm.hpp"
#include "satweight/parallel.hpp"
#include "satweight/strategies.hpp"
#include "satweight/synth.hpp"
#include "satweight/wls.hpp"

namespace satweight {

struct PositionError {
  double horizontal = 0.0;  // m, east-north norm
  double vertical = 0.0;    // m, |up|
};

/// Estimate-minus-truth in the ENU frame at the truth position.
PositionError position_errors(const NavState& estimate, const NavState& truth);
inline PositionError position_errors(const SolverResult& result, const NavState& truth) {
  return position_errors(result.state, truth);
}

/// Nearest-rank quantile: element ceil(q * n) of the sorted sample (1-based).
double empirical_cdf_quantile(std::span<const double> errors, double q);

struct Ellipse {
  double semi_major = 0.0;   // m
  double semi_minor = 0.0;   // m
  double orientation = 0.0;  // rad, major axis angle from east towards north, in [0, pi)
};

/// 1-sigma ellipse of a 2x2 east/north covariance.
Ellipse ellipse_from_covariance(const Eigen::Matrix2d& east_north);

struct CrlbResult {
  Eigen::Matrix4d fim;                        // clock in seconds
  Eigen::Matrix3d position_covariance_bound;  // ECEF, m^2
  Eigen::Matrix3d enu_covariance_bound;       // ENU at truth, m^2
  Ellipse one_sigma_ellipse;
};

/// Fisher information H^T R^-1 H at the truth state with R = diag(sigma^2);
/// throws missing_truth or rank_deficient.
CrlbResult crlb(const Epoch& epoch, std::span<const double> sigmas);

struct ErrorRecord {
  std::uint64_t epoch_id = 0;
  Strategy strategy = Strategy::equal;
  double horizontal_error = 0.0;
  double vertical_error = 0.0;
  bool solvable = false;
  std::size_t biased_count = 0;  // channels flagged biased in this epoch
};

struct CdfSummary {
  Strategy strategy = Strategy::equal;
  std::vector<double> horizontal;  // sorted, solvable epochs only
  std::vector<double> vertical;
  double horizontal_q68 = 0.0, horizontal_q95 = 0.0;
  double vertical_q68 = 0.0, vertical_q95 = 0.0;
  double availability = 0.0;
  std::size_t epochs = 0;
};

CdfSummary summarize(Strategy strategy, std::span<const ErrorRecord> records);

struct BenchmarkConfig {
  std::vector<Strategy> strategies = {Strategy::equal, Strategy::ground_truth, Strategy::genie,
                                      Strategy::sigma_model, Strategy::predicted, Strategy::fde};
  SolverConfig solver;
  FdeConfig fde;
  SigmaModelCoeffs sigma_model;
};

struct BenchmarkReport {
  std::vector<Strategy> strategies;
  std::vector<ErrorRecord> records;  // epoch-major, strategy-minor
  std::vector<CdfSummary> summaries;

  const CdfSummary& summary(Strategy s) const;
};

/// Weights -> WLS -> ENU error for every epoch and strategy. Per-epoch
/// failures become solvable=false. Epochs are distributed over threads; the
/// output order is fixed.
BenchmarkReport run_benchmark(std::span<const LabeledEpoch> data, const BenchmarkConfig& config,
                              const LstmModel* model = nullptr, Execution exec = Execution::parallel);

/// Weights for one strategy (FDE returns its post-exclusion weights and
/// flags solvable=false through the return value).
WeightVector strategy_weights(Strategy s, const LabeledEpoch& data, const BenchmarkConfig& config,
                              const LstmModel* model, bool& solvable);

/// Files: records.csv, cdf_<strategy>.csv per strategy, summary.json
/// (quantiles, availability, plus `metadata` verbatim).
void write_report(const BenchmarkReport& report, const std::filesystem::path& dir, const nlohmann::json& metadata);

nlohmann::json summary_json(const BenchmarkReport& report);

/// One row per (biased fraction, strategy) of a sweep.
struct SweepRow {
  double biased_fraction = 0.0;
  Strategy strategy = Strategy::equal;
  double horizontal_q95 = 0.0;
  double vertical_q95 = 0.0;
  double availability = 0.0;
};

void write_sweep_table(std::span<const SweepRow> rows, const std::filesystem::path& path);

/// Fixed 8-satellite geometry for confidence-ellipse comparisons.
struct CanonicalGeometry {
  Geodetic site{45.19 * kPi / 180.0, 5.72 * kPi / 180.0, 200.0};
  double orbit_radius = 26'560'000.0;
  std::vector<double> azimuths_deg = {10, 55, 100, 145, 190, 235, 280, 325};
  std::vector<double> elevations_deg = {15.0, 23.571428571428573, 32.142857142857146, 40.714285714285715,
                                        49.285714285714285, 57.857142857142854, 66.428571428571431, 75.0};

  /// Noise-free epoch (pseudo-ranges equal geometric ranges, zero clock).
  Epoch epoch() const;
};

nlohmann::json to_json(const CanonicalGeometry& g);
CanonicalGeometry canonical_geometry_from_json(const nlohmann::json& j);

struct EllipseRow {
  std::string method;  // strategy name or "crlb"
  Ellipse ellipse;
  Eigen::Matrix2d east_north = Eigen::Matrix2d::Zero();
  std::size_t trials = 0;  // solvable trials
};

struct EllipseStudyConfig {
  CanonicalGeometry geometry;
  MixtureParams mixture;
  double biased_fraction = 0.09;
  std::size_t trials = 10'000;
  std::uint64_t seed = 3;
};

/// Monte-Carlo east/north covariance of each strategy on the canonical
/// geometry, plus the CRLB ellipse for Gaussian noise of the mixture sigma.
std::vector<EllipseRow> confidence_ellipses(const EllipseStudyConfig& config, std::span<const Strategy> strategies,
                                            const BenchmarkConfig& bench, const LstmModel* model = nullptr);

void write_ellipses(std::span<const EllipseRow> rows, const std::filesystem::path& path);

}  // namespace satweight
