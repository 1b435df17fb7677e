#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "satweight/geo.hpp"
#include "satweight/lstm.hpp"
#include "satweight/residual_matrix.hpp"
#include "satweight/wls.hpp"

namespace satweight {

enum class Strategy { equal, ground_truth, genie, sigma_model, predicted, fde };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);
/// Every strategy, in report order.
const std::vector<Strategy>& all_strategies();

/// Variance coefficients of the elevation / C/N0 / acceleration model.
struct SigmaModelCoeffs {
  double zenith = 4.0;     // m^2
  double cn0 = 2.5e3;      // m^2 Hz
  double accel = 0.01;     // m^2 per (m/s^2)^2

  void validate() const;
};

struct FdeConfig {
  double global_test_alpha = 0.01;
  std::optional<std::size_t> max_exclusions;  // N - 4 when empty
  std::size_t min_satellites = 4;
  double measurement_sigma = 3.0;  // m, used to standardize residuals

  void validate() const;
};

WeightVector equal_weights(const Epoch& epoch);

/// 1 / max(|rho - h(X_true)|, 0.01)^2. Throws missing_truth.
WeightVector ground_truth_weights(const Epoch& epoch);

/// 1 for unflagged channels, 0 for channels flagged as biased. Throws
/// missing_truth without flags, rank_deficient with fewer than four clean channels.
WeightVector genie_aided_weights(const Epoch& epoch);

/// Inverse of the variance model
///   sigma^2 = (zenith + cn0 / (C/N0 linear) + accel * a^2) / sin^2(elevation).
/// Zero elevation or C/N0 gives weight 0.
WeightVector sigma_model_weights(const Epoch& epoch, const SigmaModelCoeffs& coeffs = {});

/// Weight of a single channel under the variance model.
double sigma_model_weight(double elevation, double cn0_dbhz, double acceleration, const SigmaModelCoeffs& coeffs);

/// Predictions below this fraction of the largest one are raised to it, so the
/// WLS always keeps every channel with positive weight.
inline constexpr double kPredictedWeightFloor = 1e-9;

/// Residual matrix -> normalization -> LSTM -> weights. Pass `matrix` to reuse
/// a prebuilt (raw) matrix for this epoch.
WeightVector predicted_weights(const Epoch& epoch, const LstmModel& model, const SolverConfig& solver = {},
                               const ResidualMatrix* matrix = nullptr);

struct FdeResult {
  WeightVector weights;
  bool solvable = false;
  std::vector<std::size_t> excluded;  // channel indices in exclusion order
  double test_statistic = 0.0;        // last chi-square statistic
  double threshold = 0.0;             // last chi-square threshold
};

/// Chi-square global test on the standardized WLS residual sum of squares
/// (N - 4 degrees of freedom); removes the channel with the largest
/// standardized residual until the test passes. A set with no redundancy
/// cannot pass the test.
FdeResult fde_residual_test(const Epoch& epoch, const FdeConfig& config = {}, const SolverConfig& solver = {});

/// Upper (1 - alpha) quantile of chi-square with `dof` degrees of freedom.
double chi_square_threshold(double alpha, std::size_t dof);

}  // namespace satweight
