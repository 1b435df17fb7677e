#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "satweight/errors.hpp"
#include "satweight/strategies.hpp"
#include "satweight/synth.hpp"
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

// Equal-weight chi-square statistic with channel `skip` removed.
double statistic_without(const Epoch& e, std::size_t skip, double sigma) {
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i != skip) use.push_back(i);
  }
  const NavState x = oracle::gauss_newton(e, use);
  double s = 0.0;
  for (std::size_t i : use) {
    const double r = oracle::residual(e.channels[i].pseudo_range, x, e.channels[i].position);
    s += r * r / (sigma * sigma);
  }
  return s;
}

}  // namespace

TEST_CASE("strategy names") {
  for (Strategy s : all_strategies()) CHECK(strategy_from_string(to_string(s)) == s);
  CHECK(all_strategies().size() == 6);
  CHECK_THROWS_AS(strategy_from_string("ransac"), Error);
}

TEST_CASE("equal weights") {
  std::mt19937_64 rng(80);
  const Epoch seven = fixture::random_epoch(rng, 7);
  CHECK(equal_weights(seven).values == std::vector<double>(7, 1.0));
  CHECK(equal_weights(fixture::random_epoch(rng, 60)).size() == 60);

  const Epoch e = noisy_epoch(rng, 9, 3.0);
  const SolverResult a = solve(e, equal_weights(e));
  const SolverResult b = solve(e, WeightVector(9, 0.37));
  CHECK(fixture::distance(a.state, b.state) <= 1e-9);
}

TEST_CASE("ground truth weights") {
  std::mt19937_64 rng(81);
  Epoch e = fixture::random_epoch(rng, 6);
  fixture::add_errors(e, {0.5, 2.0, 0.0, -0.5, 0.004, 10.0});
  const WeightVector w = ground_truth_weights(e);
  // Adding 0.5 m to a 2e7 m pseudo-range moves it by up to half an ulp.
  CHECK(w[0] == doctest::Approx(4.0).epsilon(1e-7));
  CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-7));
  CHECK(w[2] == doctest::Approx(1e4).epsilon(1e-12));
  CHECK(w[3] == doctest::Approx(4.0).epsilon(1e-7));
  for (std::size_t i = 0; i < 6; ++i) {
    const double r = std::max(std::abs(e.channels[i].truth->error), 0.01);
    CHECK(w[i] == doctest::Approx(1.0 / (r * r)).epsilon(1e-12));
  }
  CHECK(w[4] == doctest::Approx(1e4).epsilon(1e-12));
  CHECK(w[5] == doctest::Approx(0.01).epsilon(1e-7));

  GenConfig c;
  c.epochs = 30;
  c.n_satellites = {6, 12};
  for (const auto& le : generate_dataset(c)) CHECK(ground_truth_weights(le.epoch).values == le.labels.values);

  Epoch blind = e;
  blind.truth_state.reset();
  CHECK_THROWS_AS(ground_truth_weights(blind), Error);
}

TEST_CASE("genie aided weights") {
  std::mt19937_64 rng(82);
  Epoch e = fixture::random_epoch(rng, 5);
  fixture::add_errors(e, {0.1, -0.2, 80.0, 0.3, 0.0}, {false, false, true, false, false});
  CHECK(genie_aided_weights(e).values == std::vector<double>{1, 1, 0, 1, 1});

  Epoch clean = noisy_epoch(rng, 8, 2.0);
  CHECK(genie_aided_weights(clean).values == equal_weights(clean).values);

  Epoch mixed = fixture::random_epoch(rng, 9);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::vector<double> err(9);
  for (auto& v : err) v = noise(rng);
  err[1] += 120.0;
  err[6] += 40.0;
  std::vector<bool> flags(9, false);
  flags[1] = flags[6] = true;
  fixture::add_errors(mixed, err, flags);
  const SolverResult with_genie = solve(mixed, genie_aided_weights(mixed));
  const SolverResult reduced = solve(fixture::without(fixture::without(mixed, 6), 1), WeightVector(7, 1.0));
  CHECK(fixture::distance(with_genie.state, reduced.state) <= 1e-9);

  Epoch too_many = e;
  for (std::size_t i = 0; i < 2; ++i) too_many.channels[i].truth->biased = true;
  try {
    genie_aided_weights(too_many);
    FAIL("expected rank_deficient");
  } catch (const Error& err_) {
    CHECK(err_.category() == ErrorCategory::rank_deficient);
  }
  Epoch unflagged = e;
  unflagged.channels[0].truth.reset();
  CHECK_THROWS_AS(genie_aided_weights(unflagged), Error);
}

TEST_CASE("sigma model") {
  SigmaModelCoeffs zenith_only{4.0, 0.0, 0.01};
  CHECK(sigma_model_weight(kPi / 2, 45.0, 0.0, zenith_only) == doctest::Approx(0.25).epsilon(1e-15));

  const SigmaModelCoeffs c;
  for (double theta : {0.3, 0.7, 1.2}) {
    const double w = sigma_model_weight(theta, 40.0, 0.5, c);
    const double half = std::asin(0.5 * std::sin(theta));
    CHECK(sigma_model_weight(half, 40.0, 0.5, c) == doctest::Approx(w / 4.0).epsilon(1e-12));
  }

  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> el(0.05, kPi / 2), cn0(20.0, 55.0), acc(0.0, 3.0), coef(0.0, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const SigmaModelCoeffs r{coef(rng), 1000.0 * coef(rng), coef(rng) / 10.0};
    const double t = el(rng), q = cn0(rng), a = acc(rng);
    const double s = std::sin(t);
    const double variance = (r.zenith + r.cn0 / std::pow(10.0, q / 10.0) + r.accel * a * a) / (s * s);
    CHECK(sigma_model_weight(t, q, a, r) == doctest::Approx(1.0 / variance).epsilon(1e-12));
  }

  CHECK(sigma_model_weight(0.0, 45.0, 0.0, c) == 0.0);
  CHECK(sigma_model_weight(0.5, 0.0, 0.0, c) == 0.0);
  SigmaModelCoeffs bad;
  bad.zenith = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);

  Epoch e = fixture::random_epoch(rng, 6);
  const WeightVector w = sigma_model_weights(e);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(w[i] == sigma_model_weight(e.channels[i].elevation, e.channels[i].cn0, e.channels[i].acceleration, c));
  }
}

TEST_CASE("chi-square thresholds match tabulated values") {
  CHECK(chi_square_threshold(0.01, 1) == doctest::Approx(6.634896601).epsilon(1e-9));
  CHECK(chi_square_threshold(0.01, 5) == doctest::Approx(15.08627247).epsilon(1e-9));
  CHECK(chi_square_threshold(0.05, 10) == doctest::Approx(18.30703805).epsilon(1e-9));
  CHECK_THROWS_AS(chi_square_threshold(0.01, 0), Error);
}

TEST_CASE("fde keeps a noiseless epoch intact") {
  std::mt19937_64 rng(84);
  for (int k = 0; k < 10; ++k) {
    const Epoch e = fixture::random_epoch(rng, 8);
    const FdeResult r = fde_residual_test(e);
    CHECK(r.solvable);
    CHECK(r.excluded.empty());
    CHECK(r.weights.positive_count() == 8);
  }
}

TEST_CASE("fde removes a single large bias") {
  std::mt19937_64 rng(85);
  FdeConfig config;
  config.measurement_sigma = 1.0;
  for (int k = 0; k < 20; ++k) {
    Epoch e = fixture::random_epoch(rng, 10);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> err(10);
    for (auto& v : err) v = noise(rng);
    const std::size_t biased = static_cast<std::size_t>(k) % 10;
    err[biased] += 500.0;
    fixture::add_errors(e, err);

    const FdeResult r = fde_residual_test(e, config);
    CHECK(r.solvable);
    REQUIRE(r.excluded.size() == 1);
    CHECK(r.excluded[0] == biased);
    CHECK(r.weights[biased] == 0.0);

    // Exhaustive search over single exclusions.
    std::size_t best = 0;
    double best_stat = INFINITY;
    for (std::size_t i = 0; i < 10; ++i) {
      const double s = statistic_without(e, i, 1.0);
      if (s < best_stat) {
        best_stat = s;
        best = i;
      }
    }
    CHECK(r.excluded[0] == best);
    CHECK(r.test_statistic == doctest::Approx(best_stat).epsilon(1e-6));
  }
}

TEST_CASE("fde cannot rescue five satellites with two biases") {
  std::mt19937_64 rng(86);
  int detectable = 0;
  for (int k = 0; k < 20; ++k) {
    Epoch e = fixture::random_epoch(rng, 5);
    fixture::add_errors(e, {300.0, 0.5, -0.4, 450.0, 0.2});
    // With one redundant satellite some geometries hide both biases from
    // the global test; only the detectable ones must end unsolvable.
    if (statistic_without(e, 5, 3.0) <= chi_square_threshold(0.01, 1)) continue;
    ++detectable;
    const FdeResult r = fde_residual_test(e);
    CHECK_FALSE(r.solvable);
    CHECK(r.weights.positive_count() >= 4);
  }
  CHECK(detectable >= 15);
}

TEST_CASE("fde false-alarm rate under matching gaussian noise") {
  std::mt19937_64 rng(87);
  const FdeConfig config;  // alpha 0.01, sigma 3 m
  int alarms = 0;
  const int trials = 3000;
  for (int k = 0; k < trials; ++k) {
    const Epoch e = noisy_epoch(rng, 10, 3.0);
    if (!fde_residual_test(e, config).excluded.empty()) ++alarms;
  }
  const double rate = static_cast<double>(alarms) / trials;
  MESSAGE("false alarm rate " << rate);
  CHECK(rate <= 0.01 + 0.02);
}

TEST_CASE("predicted weights contract") {
  std::mt19937_64 rng(88);
  const LstmModel m = LstmModel::initialized({12, 8, 1, 12}, 3);
  for (std::size_t n : {5u, 9u, 12u}) {
    const Epoch e = noisy_epoch(rng, n, 3.0);
    const WeightVector w = predicted_weights(e, m);
    CHECK(w.size() == n);
    for (double v : w.values) CHECK(v > 0.0);
    // A prebuilt matrix gives the same answer.
    const ResidualMatrix raw = build_residual_matrix(e);
    CHECK(predicted_weights(e, m, {}, &raw).values == w.values);
  }
  const Epoch big = noisy_epoch(rng, 13, 3.0);
  CHECK_THROWS_AS(predicted_weights(big, m), Error);

  // All-zero output falls back to equal weights.
  const LstmModel dead = LstmModel::zeros({12, 4, 1, 12});
  const Epoch e = noisy_epoch(rng, 7, 3.0);
  CHECK(predicted_weights(e, dead).values == equal_weights(e).values);
}
