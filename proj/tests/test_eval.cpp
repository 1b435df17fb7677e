#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "satweight/errors.hpp"
#include "satweight/eval.hpp"
#include "support/oracles.hpp"

using namespace satweight;

namespace {

constexpr double kDeg = 3.141592653589793 / 180.0;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Receiver at (lat, lon, 0) with satellites at the listed azimuth/elevation
// pairs, built from the oracle frame only.
Epoch sky(double lat, double lon, const std::vector<std::pair<double, double>>& az_el) {
  Epoch e;
  const NavState truth{oracle::ecef_from_geodetic(lat, lon, 0.0), 0.0};
  e.truth_state = truth;
  std::uint32_t id = 1;
  for (const auto& [az, el] : az_el) {
    const double a = az * kDeg, l = el * kDeg;
    const double range = 2.2e7;
    SatelliteChannel ch;
    ch.sat_id = id++;
    ch.position = oracle::enu_to_ecef(range * std::cos(l) * std::sin(a), range * std::cos(l) * std::cos(a), range * std::sin(l), lat, lon, 0.0);
    ch.elevation = l;
    ch.cn0 = 45.0;
    ch.pseudo_range = oracle::pseudo_range(truth, ch.position);
    ch.truth = ChannelTruth{0.0, false};
    e.channels.push_back(ch);
  }
  return e;
}

// Independent ENU covariance bound: rows of H from explicit unit vectors,
// rotated with the textbook matrix.
Eigen::Matrix3d enu_bound(const Epoch& e, double sigma, double lat, double lon) {
  const auto m = static_cast<Eigen::Index>(e.size());
  Eigen::MatrixXd h(m, 4);
  const auto& t = e.truth_state->position;
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& s = e.channels[static_cast<std::size_t>(k)].position;
    const double dx = s.x - t.x, dy = s.y - t.y, dz = s.z - t.z;
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    h.row(k) << -dx / r, -dy / r, -dz / r, 1.0;
  }
  const Eigen::Matrix4d cov = (h.transpose() * h).inverse() * sigma * sigma;
  Eigen::Matrix3d rot;
  rot << -std::sin(lon), std::cos(lon), 0.0,
      -std::sin(lat) * std::cos(lon), -std::sin(lat) * std::sin(lon), std::cos(lat),
      std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat);
  return rot * cov.topLeftCorner<3, 3>() * rot.transpose();
}

GenConfig small_gen(std::size_t epochs, double biased, std::uint64_t seed) {
  GenConfig g;
  g.epochs = epochs;
  g.biased_fraction = biased;
  g.seed = seed;
  return g;
}

}  // namespace

TEST_CASE("position errors in the local frame") {
  const double lat = 0.8, lon = 0.3;
  const NavState truth{oracle::ecef_from_geodetic(lat, lon, 120.0), 1e-4};
  const PositionError zero = position_errors(truth, truth);
  CHECK(zero.horizontal == 0.0);
  CHECK(zero.vertical == 0.0);

  const NavState moved{oracle::enu_to_ecef(3.0, 4.0, 0.0, lat, lon, 120.0), 0.0};
  const PositionError five = position_errors(moved, truth);
  CHECK(five.horizontal == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(five.vertical == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));

  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const double la = 1.5 * u(rng), lo = 3.1 * u(rng), h = 100.0 * u(rng);
    const double e = 50.0 * u(rng), n = 50.0 * u(rng), up = 50.0 * u(rng);
    const NavState t{oracle::ecef_from_geodetic(la, lo, h), 0.0};
    const NavState est{oracle::enu_to_ecef(e, n, up, la, lo, h), 0.0};
    const PositionError pe = position_errors(est, t);
    CHECK(std::abs(pe.horizontal - std::hypot(e, n)) <= 1e-7);
    CHECK(std::abs(pe.vertical - std::abs(up)) <= 1e-7);
  }
}

TEST_CASE("nearest-rank quantile") {
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  std::shuffle(hundred.begin(), hundred.end(), std::mt19937_64(41));
  CHECK(empirical_cdf_quantile(hundred, 0.95) == 95.0);
  CHECK(empirical_cdf_quantile(hundred, 0.68) == 68.0);
  CHECK(empirical_cdf_quantile(hundred, 0.001) == 1.0);
  const std::vector<double> one = {7.5};
  CHECK(empirical_cdf_quantile(one, 0.95) == 7.5);
  CHECK(empirical_cdf_quantile(one, 0.01) == 7.5);

  std::mt19937_64 rng(42);
  std::exponential_distribution<double> x(0.3);
  std::uniform_int_distribution<std::size_t> size(1, 3000);
  for (int k = 0; k < 300; ++k) {
    std::vector<double> v(size(rng));
    for (auto& s : v) s = x(rng);
    for (double q : {0.5, 0.68, 0.9, 0.95, 0.99}) {
      REQUIRE(empirical_cdf_quantile(v, q) == oracle::nearest_rank(v, q));
    }
  }
  CHECK_THROWS_AS(empirical_cdf_quantile(std::vector<double>{}, 0.5), Error);
  CHECK_THROWS_AS(empirical_cdf_quantile(one, 0.0), Error);
  CHECK_THROWS_AS(empirical_cdf_quantile(one, 1.5), Error);
}

TEST_CASE("ellipse of a covariance") {
  const Ellipse a = ellipse_from_covariance((Eigen::Matrix2d() << 4.0, 0.0, 0.0, 1.0).finished());
  CHECK(a.semi_major == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.semi_minor == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.orientation == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const Ellipse b = ellipse_from_covariance((Eigen::Matrix2d() << 1.0, 0.0, 0.0, 9.0).finished());
  CHECK(b.semi_major == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(b.orientation == doctest::Approx(kDeg * 90.0).epsilon(1e-12));

  // Rotated by 30 degrees.
  const double t = 30.0 * kDeg;
  Eigen::Matrix2d r;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  const Eigen::Matrix2d c = r * Eigen::Vector2d(16.0, 4.0).asDiagonal() * r.transpose();
  const Ellipse e = ellipse_from_covariance(c);
  CHECK(e.semi_major == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(e.semi_minor == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(e.orientation == doctest::Approx(t).epsilon(1e-12));
}

TEST_CASE("crlb against an independent bound") {
  std::mt19937_64 rng(43);
  const Epoch e = fixture::random_epoch(rng, 9);
  const std::vector<double> sigma(9, 3.0), doubled(9, 6.0);
  const CrlbResult a = crlb(e, sigma), b = crlb(e, doubled);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(b.position_covariance_bound(i, j) == doctest::Approx(4.0 * a.position_covariance_bound(i, j)).epsilon(1e-9).scale(1e-6));
    }
  }
  // FIM with equal sigmas is H^T H / sigma^2, H in the documented units.
  Eigen::MatrixXd h(9, 4);
  const auto& t = e.truth_state->position;
  for (Eigen::Index k = 0; k < 9; ++k) {
    const auto& s = e.channels[static_cast<std::size_t>(k)].position;
    const double dx = s.x - t.x, dy = s.y - t.y, dz = s.z - t.z;
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    h.row(k) << -dx / r, -dy / r, -dz / r, kSpeedOfLight;
  }
  const Eigen::Matrix4d fim = h.transpose() * h / 9.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(a.fim(i, j) == doctest::Approx(fim(i, j)).epsilon(1e-9).scale(1e-9 * std::abs(fim(3, 3))));
  }

  // Four satellites at one elevation cannot separate height from the clock;
  // a zenith satellite fixes that without breaking the symmetry.
  const Epoch four = sky(0.6, -1.1, {{0, 35}, {90, 35}, {180, 35}, {270, 35}});
  try {
    crlb(four, std::vector<double>(4, 2.0));
    FAIL("expected rank_deficient");
  } catch (const Error& err) {
    CHECK(err.category() == ErrorCategory::rank_deficient);
  }
  const Epoch five = sky(0.6, -1.1, {{0, 35}, {90, 35}, {180, 35}, {270, 35}, {0, 90}});
  const CrlbResult sym = crlb(five, std::vector<double>(5, 2.0));
  CHECK(std::abs(sym.one_sigma_ellipse.semi_major - sym.one_sigma_ellipse.semi_minor) <= 1e-9);
  CHECK(sym.one_sigma_ellipse.semi_major > 0.0);

  const Epoch eight = sky(0.6, -1.1, {{10, 15}, {55, 24}, {100, 32}, {145, 41}, {190, 49}, {235, 58}, {280, 66}, {325, 75}});
  const Eigen::Matrix3d expected = enu_bound(eight, 3.0, 0.6, -1.1);
  const CrlbResult enu = crlb(eight, std::vector<double>(8, 3.0));
  CHECK((enu.enu_covariance_bound - expected).norm() <= 1e-9 * expected.norm());
}

TEST_CASE("crlb ignores satellite order and rejects bad input") {
  std::mt19937_64 rng(44);
  for (int k = 0; k < 20; ++k) {
    const Epoch e = fixture::random_epoch(rng, 8);
    std::vector<double> sigma(8);
    std::uniform_real_distribution<double> s(1.0, 10.0);
    for (auto& v : sigma) v = s(rng);
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Epoch p = e;
    std::vector<double> ps(8);
    for (std::size_t i = 0; i < 8; ++i) {
      p.channels[i] = e.channels[perm[i]];
      ps[i] = sigma[perm[i]];
    }
    const CrlbResult a = crlb(e, sigma), b = crlb(p, ps);
    CHECK((a.position_covariance_bound - b.position_covariance_bound).norm() <= 1e-9 * a.position_covariance_bound.norm());
  }
  Epoch e = fixture::random_epoch(rng, 6);
  CHECK_THROWS_AS(crlb(e, std::vector<double>(5, 1.0)), Error);
  Epoch no_truth = e;
  no_truth.truth_state.reset();
  try {
    crlb(no_truth, std::vector<double>(6, 1.0));
    FAIL("expected missing_truth");
  } catch (const Error& err) {
    CHECK(err.category() == ErrorCategory::missing_truth);
  }
  Epoch stacked = e;
  for (auto& ch : stacked.channels) ch.position = stacked.channels[0].position;
  try {
    crlb(stacked, std::vector<double>(6, 1.0));
    FAIL("expected rank_deficient");
  } catch (const Error& err) {
    CHECK(err.category() == ErrorCategory::rank_deficient);
  }
}

TEST_CASE("equal-weight Monte-Carlo covariance meets the bound") {
  // Gaussian noise only, so the equal-weight solution is efficient and its
  // ENU covariance should match the bound.
  const Epoch base = sky(0.79, 0.1, {{10, 15}, {55, 24}, {100, 32}, {145, 41}, {190, 49}, {235, 58}, {280, 66}, {325, 75}});
  const double sigma = 3.0;
  const Eigen::Matrix3d bound = enu_bound(base, sigma, 0.79, 0.1);
  std::mt19937_64 rng(45);
  std::normal_distribution<double> noise(0.0, sigma);
  const int trials = 10'000;
  std::vector<Eigen::Vector3d> enu(trials);
  for (int t = 0; t < trials; ++t) {
    Epoch e = base;
    for (auto& ch : e.channels) ch.pseudo_range += noise(rng);
    const SolverResult r = solve(e, WeightVector(8, 1.0));
    REQUIRE(r.converged);
    enu[static_cast<std::size_t>(t)] = ecef_to_enu(r.state.position, base.truth_state->position);
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& v : enu) mean += v;
  mean /= trials;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : enu) cov += (v - mean) * (v - mean).transpose();
  cov /= trials - 1;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(cov(i, j) - bound(i, j)) <= 0.1 * std::sqrt(bound(i, i) * bound(j, j)));
    }
  }
  const std::vector<double> sigmas(8, sigma);
  CHECK((crlb(base, sigmas).enu_covariance_bound - bound).norm() <= 1e-9 * bound.norm());
}

TEST_CASE("summaries") {
  std::vector<ErrorRecord> recs;
  for (int i = 1; i <= 20; ++i) {
    ErrorRecord r;
    r.epoch_id = static_cast<std::uint64_t>(i);
    r.strategy = Strategy::fde;
    r.solvable = i % 5 != 0;
    r.horizontal_error = i;
    r.vertical_error = 2.0 * i;
    recs.push_back(r);
    r.strategy = Strategy::equal;
    r.solvable = true;
    recs.push_back(r);
  }
  const CdfSummary eq = summarize(Strategy::equal, recs);
  CHECK(eq.epochs == 20);
  CHECK(eq.availability == 1.0);
  CHECK(eq.horizontal_q95 == 19.0);
  CHECK(eq.vertical_q68 == 28.0);
  const CdfSummary f = summarize(Strategy::fde, recs);
  CHECK(f.availability == doctest::Approx(0.8));
  CHECK(f.horizontal.size() == 16);
  CHECK(std::is_sorted(f.horizontal.begin(), f.horizontal.end()));
  const CdfSummary none = summarize(Strategy::genie, recs);
  CHECK(none.epochs == 0);
  CHECK(std::isnan(none.horizontal_q95));
}

TEST_CASE("no-fault benchmark") {
  const auto data = generate_dataset(small_gen(2000, 0.0, 46));
  ModelDims dims;
  dims.input_size = dims.output_size = 12;
  dims.hidden_size = 16;
  const LstmModel model = LstmModel::initialized(dims, 5);
  BenchmarkConfig cfg;
  const BenchmarkReport rep = run_benchmark(data, cfg, &model);
  const std::size_t ns = cfg.strategies.size();
  REQUIRE(rep.records.size() == 2000 * ns);
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    CHECK(rep.records[i].epoch_id == data[i / ns].epoch_id);
    CHECK(rep.records[i].strategy == cfg.strategies[i % ns]);
    CHECK(rep.records[i].biased_count == 0);
  }
  const auto& eq = rep.summary(Strategy::equal);
  for (Strategy s : {Strategy::genie, Strategy::fde}) {
    CHECK(std::abs(rep.summary(s).horizontal_q95 / eq.horizontal_q95 - 1.0) <= 0.1);
    CHECK(std::abs(rep.summary(s).vertical_q95 / eq.vertical_q95 - 1.0) <= 0.1);
  }
  // Nothing is flagged, so genie weights are the equal weights.
  for (std::size_t i = 0; i < rep.records.size(); i += ns) {
    CHECK(rep.records[i + 2].horizontal_error == rep.records[i].horizontal_error);
  }
  // Weights from the realized errors help even without faults.
  CHECK(rep.summary(Strategy::ground_truth).horizontal_q95 <= eq.horizontal_q95);
  for (Strategy s : {Strategy::equal, Strategy::ground_truth, Strategy::genie, Strategy::sigma_model, Strategy::predicted}) {
    CHECK(rep.summary(s).availability == 1.0);
    CHECK(rep.summary(s).epochs == 2000);
  }
}

TEST_CASE("biased benchmark aggregates") {
  const auto data = generate_dataset(small_gen(2500, 0.09, 47));
  BenchmarkConfig cfg;
  cfg.strategies = {Strategy::equal, Strategy::ground_truth, Strategy::genie, Strategy::fde};
  const BenchmarkReport rep = run_benchmark(data, cfg);
  const double eq = rep.summary(Strategy::equal).horizontal_q95;
  CHECK(rep.summary(Strategy::ground_truth).horizontal_q95 <= eq);
  CHECK(rep.summary(Strategy::genie).horizontal_q95 <= eq);
  CHECK(rep.summary(Strategy::fde).availability <= 1.0);
  std::size_t flagged = 0;
  for (const auto& d : data) {
    for (const auto& ch : d.epoch.channels) flagged += ch.truth->biased;
  }
  std::size_t counted = 0;
  for (std::size_t i = 0; i < rep.records.size(); i += cfg.strategies.size()) counted += rep.records[i].biased_count;
  CHECK(counted == flagged);

  const BenchmarkReport serial = run_benchmark(data, cfg, nullptr, Execution::serial);
  REQUIRE(serial.records.size() == rep.records.size());
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    CHECK(std::memcmp(&serial.records[i].horizontal_error, &rep.records[i].horizontal_error, sizeof(double)) == 0);
    CHECK(serial.records[i].solvable == rep.records[i].solvable);
  }
}

TEST_CASE("report files are byte-identical across runs") {
  const auto data = generate_dataset(small_gen(300, 0.09, 48));
  BenchmarkConfig cfg;
  cfg.strategies = {Strategy::equal, Strategy::genie};
  const auto root = std::filesystem::temp_directory_path() / "satweight_test_eval";
  std::filesystem::remove_all(root);
  const nlohmann::json meta = {{"dataset_sha256", "abc"}, {"seed", 48}};
  write_report(run_benchmark(data, cfg), root / "a", meta);
  write_report(run_benchmark(data, cfg, nullptr, Execution::serial), root / "b", meta);
  std::vector<std::string> names;
  for (const auto& f : std::filesystem::directory_iterator(root / "a")) names.push_back(f.path().filename().string());
  std::sort(names.begin(), names.end());
  CHECK(names == std::vector<std::string>{"cdf_equal.csv", "cdf_genie.csv", "records.csv", "summary.json"});
  for (const auto& n : names) CHECK(slurp(root / "a" / n) == slurp(root / "b" / n));

  const auto summary = nlohmann::json::parse(slurp(root / "a" / "summary.json"));
  CHECK(summary.at("metadata") == meta);
  CHECK(summary.at("quantile_method") == "nearest-rank");
  CHECK(summary.at("strategies").size() == 2);

  std::istringstream cdf(slurp(root / "a" / "cdf_equal.csv"));
  std::string line;
  std::getline(cdf, line);
  CHECK(line == "cumulative_probability,horizontal_error_m,vertical_error_m");
  std::size_t rows = 0;
  double last_p = 0.0, last_h = 0.0;
  while (std::getline(cdf, line)) {
    ++rows;
    const double p = std::stod(line.substr(0, line.find(',')));
    const double h = std::stod(line.substr(line.find(',') + 1));
    CHECK(p > last_p);
    CHECK(h >= last_h);
    last_p = p;
    last_h = h;
  }
  CHECK(rows == 300);
  CHECK(last_p == 1.0);

  std::istringstream recs(slurp(root / "a" / "records.csv"));
  std::size_t lines = 0;
  while (std::getline(recs, line)) ++lines;
  CHECK(lines == 1 + 300 * 2);
  std::filesystem::remove_all(root);
}

TEST_CASE("benchmark argument errors") {
  const auto data = generate_dataset(small_gen(5, 0.09, 49));
  BenchmarkConfig cfg;
  CHECK_THROWS_AS(run_benchmark(data, cfg), Error);  // predicted without a model
  cfg.strategies = {};
  CHECK_THROWS_AS(run_benchmark(data, cfg), Error);
  auto stripped = data;
  stripped[2].epoch.truth_state.reset();
  cfg.strategies = {Strategy::equal};
  try {
    run_benchmark(stripped, cfg);
    FAIL("expected missing_truth");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::missing_truth);
  }
}

TEST_CASE("sweep table shape") {
  std::vector<SweepRow> rows;
  for (double f : {0.03, 0.06, 0.09}) {
    for (Strategy s : {Strategy::equal, Strategy::genie}) rows.push_back({f, s, 1.5, 2.5, 1.0});
  }
  const auto path = std::filesystem::temp_directory_path() / "satweight_sweep.csv";
  write_sweep_table(rows, path);
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  CHECK(line == "biased_fraction,strategy,horizontal_q95_m,vertical_q95_m,availability");
  std::getline(in, line);
  CHECK(line == "0.03,equal,1.5,2.5,1");
  std::size_t n = 1;
  while (std::getline(in, line)) ++n;
  CHECK(n == 6);
  std::filesystem::remove(path);
}

TEST_CASE("canonical geometry") {
  const CanonicalGeometry g;
  const CanonicalGeometry back = canonical_geometry_from_json(nlohmann::json::parse(to_json(g).dump()));
  CHECK(back.azimuths_deg == g.azimuths_deg);
  CHECK(back.elevations_deg == g.elevations_deg);
  CHECK(back.site.latitude == doctest::Approx(g.site.latitude).epsilon(1e-15));
  const Epoch e = g.epoch();
  REQUIRE(e.size() == 8);
  const double lat = g.site.latitude, lon = g.site.longitude;
  const auto origin = oracle::ecef_from_geodetic(lat, lon, g.site.height);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& s = e.channels[i].position;
    CHECK(std::sqrt(s.x * s.x + s.y * s.y + s.z * s.z) == doctest::Approx(g.orbit_radius).epsilon(1e-12));
    const double dx = s.x - origin.x, dy = s.y - origin.y, dz = s.z - origin.z;
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double sin_el = (dx * std::cos(lat) * std::cos(lon) + dy * std::cos(lat) * std::sin(lon) + dz * std::sin(lat)) / r;
    CHECK(std::asin(sin_el) / kDeg == doctest::Approx(g.elevations_deg[i]).epsilon(1e-9));
    CHECK(e.channels[i].pseudo_range == doctest::Approx(r).epsilon(1e-15));
  }
}

TEST_CASE("confidence ellipses") {
  EllipseStudyConfig study;
  study.biased_fraction = 0.0;
  study.trials = 10'000;
  BenchmarkConfig bench;
  const std::vector<Strategy> which = {Strategy::equal, Strategy::genie};
  const auto rows = confidence_ellipses(study, which, bench);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].method == "crlb");
  CHECK(rows[1].method == "equal");
  const Epoch base = study.geometry.epoch();
  const CrlbResult bound = crlb(base, std::vector<double>(8, study.mixture.sigma));
  CHECK((rows[0].east_north - bound.enu_covariance_bound.topLeftCorner<2, 2>()).norm() == 0.0);
  const Eigen::Matrix2d& b = rows[0].east_north;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(std::abs(rows[1].east_north(i, j) - b(i, j)) <= 0.1 * std::sqrt(b(i, i) * b(j, j)));
  }
  CHECK(rows[1].trials == 10'000);
  CHECK((rows[2].east_north - rows[1].east_north).norm() == 0.0);
  CHECK(rows[1].ellipse.semi_major >= bound.one_sigma_ellipse.semi_minor);

  const auto path = std::filesystem::temp_directory_path() / "satweight_ellipses.csv";
  write_ellipses(rows, path);
  std::istringstream in(slurp(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == 4);
  std::filesystem::remove(path);
}
