#include "satweight/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Dense>

#include "satweight/errors.hpp"
#include "satweight/synth.hpp"
#include "satweight/train.hpp"

namespace satweight {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::equal: return "equal";
    case Strategy::ground_truth: return "ground_truth";
    case Strategy::genie: return "genie";
    case Strategy::sigma_model: return "sigma_model";
    case Strategy::predicted: return "predicted";
    case Strategy::fde: return "fde";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view name) {
  for (Strategy s : all_strategies()) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCategory::invalid_argument, "unknown strategy '" + std::string(name) + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> kAll = {Strategy::equal,       Strategy::ground_truth, Strategy::genie,
                                             Strategy::sigma_model, Strategy::predicted,    Strategy::fde};
  return kAll;
}

void SigmaModelCoeffs::validate() const {
  if (!(zenith >= 0.0) || !(cn0 >= 0.0) || !(accel >= 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "variance model coefficients must be non-negative");
  }
}

void FdeConfig::validate() const {
  if (!(global_test_alpha > 0.0 && global_test_alpha < 1.0) || min_satellites < 4 || !(measurement_sigma > 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "FDE needs 0<alpha<1, min_satellites>=4, sigma>0");
  }
}

WeightVector equal_weights(const Epoch& epoch) { return WeightVector(epoch.size(), 1.0); }

WeightVector ground_truth_weights(const Epoch& epoch) { return truth_label_weights(epoch); }

WeightVector genie_aided_weights(const Epoch& epoch) {
  WeightVector w(epoch.size(), 1.0);
  for (std::size_t i = 0; i < epoch.size(); ++i) {
    const auto& truth = epoch.channels[i].truth;
    if (!truth) throw Error(ErrorCategory::missing_truth, "channel without bias flag");
    if (truth->biased) w[i] = 0.0;
  }
  if (w.positive_count() < 4) {
    throw Error(ErrorCategory::rank_deficient, "fewer than four unbiased satellites");
  }
  return w;
}

double sigma_model_weight(double elevation, double cn0_dbhz, double acceleration, const SigmaModelCoeffs& coeffs) {
  const double s = std::sin(elevation);
  if (!(s > 0.0) || !(cn0_dbhz > 0.0)) return 0.0;
  const double cn0_linear = std::pow(10.0, cn0_dbhz / 10.0);
  const double variance =
      (coeffs.zenith + coeffs.cn0 / cn0_linear + coeffs.accel * acceleration * acceleration) / (s * s);
  return variance > 0.0 ? 1.0 / variance : 0.0;
}

WeightVector sigma_model_weights(const Epoch& epoch, const SigmaModelCoeffs& coeffs) {
  coeffs.validate();
  WeightVector w(epoch.size(), 0.0);
  for (std::size_t i = 0; i < epoch.size(); ++i) {
    const auto& ch = epoch.channels[i];
    w[i] = sigma_model_weight(ch.elevation, ch.cn0, ch.acceleration, coeffs);
  }
  return w;
}

WeightVector predicted_weights(const Epoch& epoch, const LstmModel& model, const SolverConfig& solver,
                               const ResidualMatrix* matrix) {
  const std::size_t n = epoch.size();
  const ResidualMatrix built = matrix ? ResidualMatrix{} : build_residual_matrix(epoch, solver, model.gamma);
  const ResidualMatrix& m = matrix ? *matrix : built;
  if (m.n() != n) throw Error(ErrorCategory::invalid_argument, "residual matrix does not match the epoch");

  const std::size_t pad = model.dims().input_size;
  const RowMatrix input = prepare_input(m, model.clip, pad, model.mask_code);
  const Eigen::VectorXd out = lstm_forward(model, input, PredictionMask::leading(n, pad));

  WeightVector w(n, 0.0);
  double largest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = target_to_weight(out[static_cast<Eigen::Index>(i)], model.log_labels);
    if (std::isfinite(w[i])) largest = std::max(largest, w[i]);
  }
  if (!(largest > 0.0)) return equal_weights(epoch);
  for (double& v : w.values) {
    if (!std::isfinite(v)) v = largest;
    v = std::max(v, kPredictedWeightFloor * largest);
  }
  return w;
}

double chi_square_threshold(double alpha, std::size_t dof) {
  if (dof == 0) throw Error(ErrorCategory::invalid_argument, "chi-square needs at least one degree of freedom");
  const boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

FdeResult fde_residual_test(const Epoch& epoch, const FdeConfig& config, const SolverConfig& solver) {
  config.validate();
  const std::size_t n = epoch.size();
  FdeResult result;
  result.weights = WeightVector(n, 1.0);
  if (n < config.min_satellites) return result;

  const std::size_t max_exclusions = config.max_exclusions.value_or(n >= 4 ? n - 4 : 0);
  const double sigma2 = config.measurement_sigma * config.measurement_sigma;
  std::size_t active = n;

  while (true) {
    WeightVector w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) w[i] = result.weights[i] > 0.0 ? 1.0 / sigma2 : 0.0;
    SolverResult sol;
    try {
      sol = solve(epoch, w, solver);
    } catch (const Error&) {
      result.solvable = false;
      return result;
    }
    double statistic = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] > 0.0) statistic += sol.residuals[i] * sol.residuals[i] / sigma2;
    }
    result.test_statistic = statistic;
    const std::size_t dof = active - 4;
    if (dof >= 1) {
      result.threshold = chi_square_threshold(config.global_test_alpha, dof);
      if (statistic <= result.threshold) {
        result.solvable = true;
        return result;
      }
    }
    if (dof == 0 || result.excluded.size() >= max_exclusions || active - 1 < config.min_satellites) {
      result.solvable = false;
      return result;
    }

    std::size_t worst = n;
    double worst_score = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;
      const Eigen::Vector4d row = jacobian_row(sol.state, epoch.channels[i].position);
      const double leverage = row.dot(sol.covariance * row);
      const double var = sigma2 - leverage;
      const double score = std::abs(sol.residuals[i]) / std::sqrt(var > 1e-12 * sigma2 ? var : sigma2);
      if (score > worst_score) {
        worst_score = score;
        worst = i;
      }
    }
    result.weights[worst] = 0.0;
    result.excluded.push_back(worst);
    --active;
  }
}

}  // namespace satweight
