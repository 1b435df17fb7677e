#include "satweight/wls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "satweight/errors.hpp"

namespace satweight {

std::size_t WeightVector::positive_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double w) { return w > 0.0; }));
}

void WeightVector::validate(std::size_t n) const {
  if (values.size() != n) {
    throw Error(ErrorCategory::invalid_argument,
                "weight vector has " + std::to_string(values.size()) + " entries for " + std::to_string(n) + " satellites");
  }
  for (double w : values) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCategory::invalid_argument, "weights must be finite and non-negative");
    }
  }
  if (positive_count() < 4) {
    throw Error(ErrorCategory::rank_deficient, "fewer than four satellites carry positive weight");
  }
}

void SolverConfig::validate() const {
  if (max_iterations < 1 || !(step_tolerance > 0.0) || !(initial_damping > 0.0) || !(damping_up > 1.0) ||
      !(damping_down > 0.0 && damping_down < 1.0)) {
    throw Error(ErrorCategory::invalid_argument, "invalid solver configuration");
  }
  if (initial_state && !initial_state->finite()) {
    throw Error(ErrorCategory::invalid_argument, "solver initial state is not finite");
  }
}

double objective(const Epoch& epoch, const WeightVector& weights, const NavState& state) {
  double sum = 0.0;
  for (std::size_t i = 0; i < epoch.size(); ++i) {
    const double r = epoch.channels[i].pseudo_range - observation_function(state, epoch.channels[i].position);
    sum += weights[i] * r * r;
  }
  return sum;
}

namespace {

// Internal parameterization: [x, y, z, c * clock_bias], all in meters, so the
// normal matrix is well scaled.
using Params = Eigen::Vector4d;

struct ActiveSet {
  std::vector<std::size_t> index;
  std::vector<double> weight;  // normalized by the largest weight
};

NavState to_state(const Params& p) { return {{p[0], p[1], p[2]}, p[3] / kSpeedOfLight}; }

Params to_params(const NavState& s) {
  return {s.position.x, s.position.y, s.position.z, s.clock_bias * kSpeedOfLight};
}

// Extended precision: ranges near 2e7 m otherwise leave ~1e-8 m of rounding in
// each residual, enough to hide the last sub-millimeter steps.
long double residual(const SatelliteChannel& ch, const Params& p) {
  const long double dx = static_cast<long double>(ch.position.x) - p[0];
  const long double dy = static_cast<long double>(ch.position.y) - p[1];
  const long double dz = static_cast<long double>(ch.position.z) - p[2];
  return ch.pseudo_range - (std::sqrt(dx * dx + dy * dy + dz * dz) + p[3]);
}

long double weighted_cost(const Epoch& epoch, const ActiveSet& active, const Params& p) {
  long double sum = 0.0L;
  for (std::size_t k = 0; k < active.index.size(); ++k) {
    const long double r = residual(epoch.channels[active.index[k]], p);
    sum += active.weight[k] * r * r;
  }
  return sum;
}

// Builds H^T W H and H^T W r with H rows [-u, 1].
void linearize(const Epoch& epoch, const ActiveSet& active, std::span<const double> weight, const Params& p,
               Eigen::Matrix4d& normal, Eigen::Vector4d& rhs) {
  normal.setZero();
  rhs.setZero();
  for (std::size_t k = 0; k < active.index.size(); ++k) {
    const auto& ch = epoch.channels[active.index[k]];
    const Eigen::Vector3d d = ch.position.vec() - p.head<3>();
    const double range = d.norm();
    if (!(range > 0.0)) {
      throw Error(ErrorCategory::degenerate_geometry, "receiver estimate coincides with a satellite");
    }
    Eigen::Vector4d row;
    row << -d / range, 1.0;
    const double r = static_cast<double>(residual(ch, p));
    normal.noalias() += weight[k] * row * row.transpose();
    rhs.noalias() += weight[k] * r * row;
  }
}

void require_full_rank(const Eigen::Matrix4d& normal) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal, Eigen::EigenvaluesOnly);
  const Eigen::Vector4d ev = eig.eigenvalues();
  if (!(ev.maxCoeff() > 0.0) || ev.minCoeff() <= 1e-12 * ev.maxCoeff()) {
    throw Error(ErrorCategory::rank_deficient, "normal matrix is singular (degenerate satellite geometry)");
  }
}

struct Descent {
  Params params;
  bool converged = false;
  int iterations = 0;
};

Descent descend(const Epoch& epoch, const ActiveSet& active, Params p, const SolverConfig& config) {
  Descent out;
  long double cost = weighted_cost(epoch, active, p);
  double damping = config.initial_damping;
  Eigen::Matrix4d normal;
  Eigen::Vector4d rhs;
  bool relinearize = true;
  for (int it = 0; it < config.max_iterations; ++it) {
    out.iterations = it + 1;
    if (relinearize) {
      linearize(epoch, active, active.weight, p, normal, rhs);
      require_full_rank(normal);
      // Damping shrinks steps along correlated directions, so judge
      // convergence on the undamped step.
      const Eigen::Vector4d gauss_newton = normal.ldlt().solve(rhs);
      // A step this short changes the cost by less than its rounding, so
      // take it without comparing.
      if (gauss_newton.norm() < config.step_tolerance) {
        p += gauss_newton;
        out.converged = true;
        break;
      }
    }
    Eigen::Matrix4d augmented = normal;
    augmented.diagonal() += damping * normal.diagonal();
    const Eigen::Vector4d step = augmented.ldlt().solve(rhs);
    if (!step.allFinite()) {
      throw Error(ErrorCategory::rank_deficient, "normal equations produced a non-finite step");
    }
    const Params candidate = p + step;
    const long double candidate_cost = weighted_cost(epoch, active, candidate);
    if (candidate_cost <= cost) {
      p = candidate;
      cost = candidate_cost;
      damping = std::max(damping * config.damping_down, 1e-15);
      relinearize = true;
    } else {
      damping *= config.damping_up;
      relinearize = false;
    }
  }
  out.params = p;
  return out;
}

}  // namespace

SolverResult solve(const Epoch& epoch, const WeightVector& weights, const SolverConfig& config) {
  config.validate();
  const std::size_t n = epoch.size();
  if (weights.size() != n) {
    throw Error(ErrorCategory::invalid_argument, "weights and epoch are not aligned");
  }
  for (double w : weights.values) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCategory::invalid_argument, "weights must be finite and non-negative");
    }
  }

  ActiveSet active;
  const double w_max = *std::max_element(weights.values.begin(), weights.values.end());
  // Visit channels in satellite-id order so the arithmetic does not depend on
  // how the epoch lists them.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return epoch.channels[a].sat_id < epoch.channels[b].sat_id; });
  for (std::size_t i : order) {
    if (weights[i] > 0.0) {
      active.index.push_back(i);
      active.weight.push_back(weights[i] / w_max);
    }
  }
  if (active.index.size() < 4) {
    throw Error(ErrorCategory::rank_deficient,
                "only " + std::to_string(active.index.size()) + " satellites carry positive weight, need 4");
  }

  SolverResult result;
  Params p = to_params(config.initial_state.value_or(NavState{}));
  const bool uniform = std::all_of(active.weight.begin(), active.weight.end(), [](double w) { return w == 1.0; });
  if (!config.initial_state && !uniform) {
    // Strongly unequal weights converge slowly from the origin; reach the
    // basin with equal weights first.
    ActiveSet flat = active;
    std::fill(flat.weight.begin(), flat.weight.end(), 1.0);
    const Descent coarse = descend(epoch, flat, p, config);
    result.iterations += coarse.iterations;
    if (weighted_cost(epoch, active, coarse.params) <= weighted_cost(epoch, active, p)) p = coarse.params;
  }
  const Descent fine = descend(epoch, active, p, config);
  p = fine.params;
  result.iterations += fine.iterations;
  result.converged = fine.converged;

  result.state = to_state(p);
  result.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.residuals[i] = pseudo_range_residual(epoch.channels[i].pseudo_range, result.state, epoch.channels[i].position);
  }
  if (result.converged) {
    Eigen::Matrix4d normal;
    Eigen::Vector4d rhs;
    std::vector<double> raw(active.index.size());
    for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = weights[active.index[k]];
    linearize(epoch, active, raw, p, normal, rhs);
    Eigen::Matrix4d cov = normal.inverse();
    cov.row(3) /= kSpeedOfLight;
    cov.col(3) /= kSpeedOfLight;
    result.covariance = 0.5 * (cov + cov.transpose());
  }
  return result;
}

}  // namespace satweight
