#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "satweight/errors.hpp"
#include "satweight/residual_matrix.hpp"
#include "support/oracles.hpp"

using namespace satweight;

namespace {

Epoch noisy_epoch(std::mt19937_64& rng, std::size_t n, double sigma) {
  Epoch e = fixture::random_epoch(rng, n);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> err(n);
  for (auto& v : err) v = noise(rng);
  fixture::add_errors(e, err);
  return e;
}

// Straightforward construction: for each n, a fresh Gauss-Newton over the
// other satellites, then every residual against that state.
RowMatrix naive_matrix(const Epoch& e, double gamma) {
  const std::size_t n = e.size();
  RowMatrix m(n, n);
  for (std::size_t row = 0; row < n; ++row) {
    std::vector<std::size_t> use;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != row) use.push_back(i);
    }
    const NavState x = oracle::gauss_newton(e, use);
    for (std::size_t i = 0; i < n; ++i) {
      m(row, i) = i == row ? gamma : e.channels[i].pseudo_range - oracle::pseudo_range(x, e.channels[i].position);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("noiseless epoch gives a zero matrix with gamma on the diagonal") {
  std::mt19937_64 rng(20);
  for (std::size_t n : {5u, 8u, 12u, 30u}) {
    const Epoch e = fixture::random_epoch(rng, n);
    const ResidualMatrix m = build_residual_matrix(e);
    REQUIRE(m.n() == n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (r == c) {
          CHECK(m.values(r, c) == kDefaultGamma);
        } else {
          CHECK(std::abs(m.values(r, c)) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("single biased satellite against an independent construction") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 10;
    Epoch e = fixture::random_epoch(rng, n);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<double> err(n);
    for (auto& v : err) v = noise(rng);
    const std::size_t k = static_cast<std::size_t>(trial) % n;
    err[k] += 200.0;
    fixture::add_errors(e, err);

    const ResidualMatrix m = build_residual_matrix(e);
    const RowMatrix expected = naive_matrix(e, kDefaultGamma);
    CHECK((m.values - expected).cwiseAbs().maxCoeff() <= 1e-6);

    // Row k is clean to within noise; every other row shows the bias in
    // column k well above the 0.5 m noise.
    for (std::size_t c = 0; c < n; ++c) {
      if (c != k) CHECK(std::abs(m.values(k, c)) < 5.0);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r != k) CHECK(std::abs(m.values(r, k)) > 5.0);
    }
  }
}

TEST_CASE("five satellites give five sentinels, all on the diagonal") {
  std::mt19937_64 rng(22);
  const Epoch e = noisy_epoch(rng, 5, 3.0);
  const ResidualMatrix m = build_residual_matrix(e, {}, 1234.5);
  REQUIRE(m.values.rows() == 5);
  REQUIRE(m.values.cols() == 5);
  int sentinels = 0;
  for (Eigen::Index r = 0; r < 5; ++r) {
    for (Eigen::Index c = 0; c < 5; ++c) {
      if (m.values(r, c) == 1234.5) {
        ++sentinels;
        CHECK(r == c);
      }
    }
  }
  CHECK(sentinels == 5);
}

TEST_CASE("too few satellites is rejected") {
  std::mt19937_64 rng(23);
  const Epoch e = fixture::random_epoch(rng, 4);
  CHECK_THROWS_AS(build_residual_matrix(e), Error);
}

TEST_CASE("degenerate subset names the failing row") {
  std::mt19937_64 rng(24);
  Epoch e = fixture::random_epoch(rng, 5);
  // Satellites 1..4 on one line of sight: only the subset without 0 is
  // degenerate, every other subset keeps satellite 0 off the line.
  const auto& t = e.truth_state->position;
  const auto far = e.channels[1].position;
  for (std::size_t i = 1; i < 5; ++i) {
    const double s = 1.0 + 0.01 * static_cast<double>(i);
    e.channels[i].position = {t.x + s * (far.x - t.x), t.y + s * (far.y - t.y), t.z + s * (far.z - t.z)};
    e.channels[i].pseudo_range = oracle::pseudo_range(*e.truth_state, e.channels[i].position);
  }
  try {
    build_residual_matrix(e);
    FAIL("expected rejection");
  } catch (const Error& err) {
    CHECK(err.category() == ErrorCategory::degenerate_geometry);
  }
}

TEST_CASE("permuted satellites permute rows and columns") {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 9;
    const Epoch e = noisy_epoch(rng, n, 5.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Epoch p = e;
    for (std::size_t i = 0; i < n; ++i) p.channels[i] = e.channels[perm[i]];
    const ResidualMatrix a = build_residual_matrix(e), b = build_residual_matrix(p);
    double worst = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) worst = std::max(worst, std::abs(b.values(r, c) - a.values(perm[r], perm[c])));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("leave-one-out solution ignores the excluded pseudo-range") {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    const Epoch e = noisy_epoch(rng, 8, 3.0);
    const std::size_t n = static_cast<std::size_t>(trial) % 8;
    Epoch moved = e;
    moved.channels[n].pseudo_range += trial % 2 ? 5000.0 : -300.0;
    LeaveOneOutSolutions a, b;
    build_residual_matrix(e, {}, kDefaultGamma, &a);
    const ResidualMatrix mb = build_residual_matrix(moved, {}, kDefaultGamma, &b);
    // Warm starts differ, so agreement is to solver precision.
    CHECK(fixture::distance(a.excluded[n], b.excluded[n]) <= 1e-6);
    CHECK(std::abs(mb.values(n, n) - kDefaultGamma) == 0.0);
  }
}

TEST_CASE("normalization") {
  ResidualMatrix m;
  m.values = RowMatrix::Zero(3, 3);
  m.values.diagonal().setConstant(kDefaultGamma);
  m.values(0, 1) = 300.0;
  m.values(1, 0) = -50.0;
  m.values(2, 1) = 0.0;
  const ResidualMatrix out = normalize_matrix(m, 100.0);
  CHECK(out.values(0, 1) == 1.0);
  CHECK(out.values(1, 0) == -0.5);
  CHECK(out.values(2, 1) == 0.0);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(out.values(i, i) == kNormalizedSentinel);
  CHECK_THROWS_AS(normalize_matrix(m, 0.0), Error);
  CHECK_THROWS_AS(normalize_matrix(m, -1.0), Error);
}

TEST_CASE("normalization matches a scalar oracle and is idempotent") {
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> u(-400.0, 400.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 6 + trial;
    ResidualMatrix m;
    m.values.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) m.values(r, c) = r == c ? kDefaultGamma : u(rng);
    }
    const double clip = 50.0 + trial;
    const ResidualMatrix out = normalize_matrix(m, clip);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        const double v = m.values(r, c);
        double expected = 2.0;
        if (r != c) expected = v > clip ? 1.0 : v < -clip ? -1.0 : v / clip;
        CHECK(out.values(r, c) == doctest::Approx(expected).epsilon(1e-15));
      }
    }
    const ResidualMatrix again = normalize_matrix(out, clip);
    CHECK(again.values == out.values);
  }
}

TEST_CASE("parallel and serial builds agree exactly") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 5; ++trial) {
    const Epoch e = noisy_epoch(rng, 20, 3.0);
    LeaveOneOutSolutions sa, sb;
    const ResidualMatrix a = build_residual_matrix(e, {}, kDefaultGamma, &sa);
    const ResidualMatrix b = build_residual_matrix_serial(e, {}, kDefaultGamma, &sb);
    CHECK(a.values == b.values);
    for (std::size_t n = 0; n < e.size(); ++n) CHECK(fixture::distance(sa.excluded[n], sb.excluded[n]) == 0.0);
  }
}
