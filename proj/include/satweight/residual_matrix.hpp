#pragma once

#include <optional>

#include <Eigen/Core>

#include "satweight/geo.hpp"
#include "satweight/wls.hpp"

namespace satweight {

inline constexpr double kDefaultGamma = 1000.0;  // m
inline constexpr double kDefaultClip = 100.0;    // m
/// Diagonal code written by normalize_matrix; lies outside [-1, 1].
inline constexpr double kNormalizedSentinel = 2.0;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Leave-one-out residual matrix. Row n holds the residuals of every satellite
/// against the solution computed without satellite n; the diagonal holds gamma.
struct ResidualMatrix {
  RowMatrix values;
  double gamma = kDefaultGamma;
  /// Set once the matrix has been normalized with this clip.
  std::optional<double> clip;

  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
};

/// All-satellite solution and the N leave-one-out solutions behind a matrix.
struct LeaveOneOutSolutions {
  NavState all_in_view;
  std::vector<NavState> excluded;  // excluded[n] solved without satellite n
};

/// Builds the matrix with the N subset solves distributed over OpenMP threads.
/// Throws degenerate_geometry naming the lowest failing subset.
ResidualMatrix build_residual_matrix(const Epoch& epoch, const SolverConfig& config = {},
                                     double gamma = kDefaultGamma,
                                     LeaveOneOutSolutions* solutions = nullptr);

/// Single-threaded reference of build_residual_matrix.
ResidualMatrix build_residual_matrix_serial(const Epoch& epoch, const SolverConfig& config = {},
                                            double gamma = kDefaultGamma,
                                            LeaveOneOutSolutions* solutions = nullptr);

/// Clamps off-diagonal entries to [-clip, clip], scales them into [-1, 1] and
/// writes kNormalizedSentinel on the diagonal.
ResidualMatrix normalize_matrix(const ResidualMatrix& m, double clip = kDefaultClip);

}  // namespace satweight
