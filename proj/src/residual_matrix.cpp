#include "satweight/residual_matrix.hpp"

#include <algorithm>
#include <atomic>
#include <string>

#include "satweight/errors.hpp"

namespace satweight {

namespace {

void check_epoch(const Epoch& epoch) {
  if (epoch.size() < kMinEpochSatellites) {
    throw Error(ErrorCategory::invalid_argument,
                "residual matrix needs at least 5 satellites, got " + std::to_string(epoch.size()));
  }
}

SolverConfig warm_started(const Epoch& epoch, const SolverConfig& config, NavState& all_in_view) {
  SolverResult full;
  try {
    full = solve(epoch, WeightVector(epoch.size(), 1.0), config);
  } catch (const Error& e) {
    throw Error(ErrorCategory::degenerate_geometry, std::string("epoch rejected: all-in-view solve failed: ") + e.what());
  }
  all_in_view = full.state;
  SolverConfig warm = config;
  warm.initial_state = full.state;
  return warm;
}

// Row n: equal-weight solve without satellite n, residuals of every satellite.
void fill_row(const Epoch& epoch, const SolverConfig& warm, std::size_t n, ResidualMatrix& m, NavState& excluded) {
  WeightVector w(epoch.size(), 1.0);
  w[n] = 0.0;
  const SolverResult sub = solve(epoch, w, warm);
  excluded = sub.state;
  for (std::size_t i = 0; i < epoch.size(); ++i) {
    m.values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) = i == n ? m.gamma : sub.residuals[i];
  }
}

[[noreturn]] void reject(std::size_t n, const Error& cause) {
  throw Error(ErrorCategory::degenerate_geometry,
              "epoch rejected: leave-one-out subset excluding satellite index " + std::to_string(n) +
                  " failed: " + cause.what());
}

ResidualMatrix allocate(const Epoch& epoch, double gamma) {
  ResidualMatrix m;
  const auto n = static_cast<Eigen::Index>(epoch.size());
  m.values.resize(n, n);
  m.gamma = gamma;
  return m;
}

}  // namespace

ResidualMatrix build_residual_matrix_serial(const Epoch& epoch, const SolverConfig& config, double gamma,
                                            LeaveOneOutSolutions* solutions) {
  check_epoch(epoch);
  ResidualMatrix m = allocate(epoch, gamma);
  LeaveOneOutSolutions local;
  local.excluded.resize(epoch.size());
  const SolverConfig warm = warm_started(epoch, config, local.all_in_view);
  for (std::size_t n = 0; n < epoch.size(); ++n) {
    try {
      fill_row(epoch, warm, n, m, local.excluded[n]);
    } catch (const Error& e) {
      reject(n, e);
    }
  }
  if (solutions) *solutions = std::move(local);
  return m;
}

ResidualMatrix build_residual_matrix(const Epoch& epoch, const SolverConfig& config, double gamma,
                                     LeaveOneOutSolutions* solutions) {
  check_epoch(epoch);
  ResidualMatrix m = allocate(epoch, gamma);
  LeaveOneOutSolutions local;
  local.excluded.resize(epoch.size());
  const SolverConfig warm = warm_started(epoch, config, local.all_in_view);

  const auto count = static_cast<long>(epoch.size());
  std::vector<std::optional<Error>> failures(epoch.size());
#pragma omp parallel for schedule(static)
  for (long n = 0; n < count; ++n) {
    const auto row = static_cast<std::size_t>(n);
    try {
      fill_row(epoch, warm, row, m, local.excluded[row]);
    } catch (const Error& e) {
      failures[row] = e;
    }
  }
  for (std::size_t n = 0; n < failures.size(); ++n) {
    if (failures[n]) reject(n, *failures[n]);
  }
  if (solutions) *solutions = std::move(local);
  return m;
}

ResidualMatrix normalize_matrix(const ResidualMatrix& m, double clip) {
  if (!(clip > 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "normalization clip must be positive");
  }
  if (m.clip) {
    if (*m.clip == clip) return m;
    throw Error(ErrorCategory::invalid_argument, "matrix already normalized with a different clip");
  }
  ResidualMatrix out;
  out.values.resizeLike(m.values);
  out.gamma = kNormalizedSentinel;
  out.clip = clip;
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      out.values(r, c) = r == c ? kNormalizedSentinel : std::clamp(m.values(r, c), -clip, clip) / clip;
    }
  }
  return out;
}

}  // namespace satweight
