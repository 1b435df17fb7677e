#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "satweight/geo.hpp"

namespace satweight {

/// Per-satellite weights (1/m^2), aligned with Epoch::channels.
struct WeightVector {
  std::vector<double> values;

  WeightVector() = default;
  explicit WeightVector(std::vector<double> w) : values(std::move(w)) {}
  WeightVector(std::size_t n, double w) : values(n, w) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  std::size_t positive_count() const;

  /// Throws invalid_argument unless the length is n, every entry is finite and
  /// non-negative, and at least four entries are positive.
  void validate(std::size_t n) const;

  bool operator==(const WeightVector&) const = default;
};

struct SolverConfig {
  int max_iterations = 50;
  double step_tolerance = 1e-4;  // m
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  std::optional<NavState> initial_state;  // ECEF origin with zero bias when empty

  void validate() const;
};

struct SolverResult {
  NavState state;
  std::vector<double> residuals;  // rho_i - h_i(state) for every channel
  bool converged = false;
  int iterations = 0;
  /// (H^T W H)^-1 at the solution; clock row/column in seconds. Zero unless converged.
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
};

/// Weighted sum of squared pseudo-range residuals.
double objective(const Epoch& epoch, const WeightVector& weights, const NavState& state);

/// Levenberg-Marquardt minimizer of the weighted objective. Zero-weight
/// channels are dropped from the normal equations. Throws rank_deficient when
/// fewer than four usable channels remain or the normal matrix is singular.
SolverResult solve(const Epoch& epoch, const WeightVector& weights, const SolverConfig& config = {});

}  // namespace satweight
