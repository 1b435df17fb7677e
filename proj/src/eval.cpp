#include "satweight/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Dense>

#include "satweight/errors.hpp"

namespace satweight {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  return out;
}

}  // namespace

PositionError position_errors(const NavState& estimate, const NavState& truth) {
  const Eigen::Vector3d enu = ecef_to_enu(estimate.position, truth.position);
  return {std::hypot(enu.x(), enu.y()), std::abs(enu.z())};
}

double empirical_cdf_quantile(std::span<const double> errors, double q) {
  if (errors.empty()) throw Error(ErrorCategory::invalid_argument, "quantile of an empty sample");
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCategory::invalid_argument, "quantile level must lie in (0, 1)");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  // Guard against q * n landing a hair above an integer through rounding.
  if (rank > 1 && std::abs(static_cast<double>(rank - 1) - q * static_cast<double>(sorted.size())) < 1e-9) --rank;
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Ellipse ellipse_from_covariance(const Eigen::Matrix2d& east_north) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(0.5 * (east_north + east_north.transpose()));
  const Eigen::Vector2d values = eig.eigenvalues();  // ascending
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  double angle = std::atan2(major.y(), major.x());
  if (angle < 0.0) angle += kPi;
  if (angle >= kPi) angle -= kPi;
  return {std::sqrt(std::max(values[1], 0.0)), std::sqrt(std::max(values[0], 0.0)), angle};
}

CrlbResult crlb(const Epoch& epoch, std::span<const double> sigmas) {
  if (!epoch.truth_state) throw Error(ErrorCategory::missing_truth, "CRLB needs the truth state");
  if (sigmas.size() != epoch.size()) throw Error(ErrorCategory::invalid_argument, "one sigma per satellite required");
  if (epoch.size() < 4) throw Error(ErrorCategory::rank_deficient, "CRLB needs at least four satellites");
  CrlbResult out;
  out.fim.setZero();
  for (std::size_t i = 0; i < epoch.size(); ++i) {
    if (!(sigmas[i] > 0.0)) throw Error(ErrorCategory::invalid_argument, "sigmas must be positive");
    const Eigen::Vector4d row = jacobian_row(*epoch.truth_state, epoch.channels[i].position);
    out.fim.noalias() += row * row.transpose() / (sigmas[i] * sigmas[i]);
  }
  // Invert in meter units for the clock term to keep the matrix well scaled.
  Eigen::Matrix4d scaled = out.fim;
  scaled.row(3) /= kSpeedOfLight;
  scaled.col(3) /= kSpeedOfLight;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(scaled, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-12 * eig.eigenvalues().maxCoeff()) {
    throw Error(ErrorCategory::rank_deficient, "Fisher information is singular");
  }
  const Eigen::Matrix4d inv = scaled.inverse();
  out.position_covariance_bound = 0.5 * (inv.topLeftCorner<3, 3>() + inv.topLeftCorner<3, 3>().transpose());
  const Eigen::Matrix3d rot = enu_rotation(epoch.truth_state->position);
  out.enu_covariance_bound = rot * out.position_covariance_bound * rot.transpose();
  out.one_sigma_ellipse = ellipse_from_covariance(out.enu_covariance_bound.topLeftCorner<2, 2>());
  return out;
}

CdfSummary summarize(Strategy strategy, std::span<const ErrorRecord> records) {
  CdfSummary s;
  s.strategy = strategy;
  std::size_t solvable = 0;
  for (const auto& r : records) {
    if (r.strategy != strategy) continue;
    ++s.epochs;
    if (!r.solvable) continue;
    ++solvable;
    s.horizontal.push_back(r.horizontal_error);
    s.vertical.push_back(r.vertical_error);
  }
  std::sort(s.horizontal.begin(), s.horizontal.end());
  std::sort(s.vertical.begin(), s.vertical.end());
  s.availability = s.epochs ? static_cast<double>(solvable) / static_cast<double>(s.epochs) : 0.0;
  if (!s.horizontal.empty()) {
    s.horizontal_q68 = empirical_cdf_quantile(s.horizontal, 0.68);
    s.horizontal_q95 = empirical_cdf_quantile(s.horizontal, 0.95);
    s.vertical_q68 = empirical_cdf_quantile(s.vertical, 0.68);
    s.vertical_q95 = empirical_cdf_quantile(s.vertical, 0.95);
  } else {
    s.horizontal_q68 = s.horizontal_q95 = s.vertical_q68 = s.vertical_q95 = std::nan("");
  }
  return s;
}

const CdfSummary& BenchmarkReport::summary(Strategy s) const {
  for (const auto& sum : summaries) {
    if (sum.strategy == s) return sum;
  }
  throw Error(ErrorCategory::invalid_argument, "strategy '" + std::string(to_string(s)) + "' not in report");
}

WeightVector strategy_weights(Strategy s, const LabeledEpoch& data, const BenchmarkConfig& config,
                              const LstmModel* model, bool& solvable) {
  solvable = true;
  switch (s) {
    case Strategy::equal: return equal_weights(data.epoch);
    case Strategy::ground_truth: return ground_truth_weights(data.epoch);
    case Strategy::genie: return genie_aided_weights(data.epoch);
    case Strategy::sigma_model: return sigma_model_weights(data.epoch, config.sigma_model);
    case Strategy::predicted: {
      if (!model) throw Error(ErrorCategory::invalid_argument, "predicted strategy needs a model");
      const bool have_matrix = data.residual_matrix.n() == data.epoch.size();
      return predicted_weights(data.epoch, *model, config.solver, have_matrix ? &data.residual_matrix : nullptr);
    }
    case Strategy::fde: {
      FdeResult r = fde_residual_test(data.epoch, config.fde, config.solver);
      solvable = r.solvable;
      return std::move(r.weights);
    }
  }
  throw Error(ErrorCategory::invalid_argument, "unknown strategy");
}

namespace {

ErrorRecord evaluate_one(Strategy s, const LabeledEpoch& data, const BenchmarkConfig& config, const LstmModel* model) {
  ErrorRecord rec;
  rec.epoch_id = data.epoch_id;
  rec.strategy = s;
  rec.horizontal_error = rec.vertical_error = std::nan("");
  for (const auto& ch : data.epoch.channels) {
    if (ch.truth && ch.truth->biased) ++rec.biased_count;
  }
  try {
    bool solvable = true;
    const WeightVector w = strategy_weights(s, data, config, model, solvable);
    if (!solvable) return rec;
    const SolverResult r = solve(data.epoch, w, config.solver);
    if (!r.converged) return rec;
    const PositionError e = position_errors(r, *data.epoch.truth_state);
    rec.horizontal_error = e.horizontal;
    rec.vertical_error = e.vertical;
    rec.solvable = true;
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::invalid_argument || e.category() == ErrorCategory::missing_truth) throw;
  }
  return rec;
}

}  // namespace

BenchmarkReport run_benchmark(std::span<const LabeledEpoch> data, const BenchmarkConfig& config,
                              const LstmModel* model, Execution exec) {
  BenchmarkReport report;
  report.strategies = config.strategies;
  const std::size_t ns = config.strategies.size();
  if (ns == 0) throw Error(ErrorCategory::invalid_argument, "no strategies selected");
  for (const auto& d : data) {
    if (!d.epoch.truth_state) throw Error(ErrorCategory::missing_truth, "benchmark epochs need truth");
  }
  if (model) model->validate();
  for (Strategy s : config.strategies) {
    if (s == Strategy::predicted && !model) throw Error(ErrorCategory::invalid_argument, "predicted strategy needs a model");
  }
  report.records.resize(data.size() * ns);
  std::vector<std::optional<Error>> failures(data.size());
  const auto count = static_cast<long>(data.size());
  auto one = [&](long e) {
    const auto idx = static_cast<std::size_t>(e);
    try {
      for (std::size_t k = 0; k < ns; ++k) {
        report.records[idx * ns + k] = evaluate_one(config.strategies[k], data[idx], config, model);
      }
    } catch (const Error& err) {
      failures[idx] = err;
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (long e = 0; e < count; ++e) one(e);
  } else {
    for (long e = 0; e < count; ++e) one(e);
  }
  for (const auto& f : failures) {
    if (f) throw *f;
  }
  for (Strategy s : config.strategies) report.summaries.push_back(summarize(s, report.records));
  return report;
}

json summary_json(const BenchmarkReport& report) {
  json strategies = json::array();
  for (const auto& s : report.summaries) {
    strategies.push_back({{"strategy", std::string(to_string(s.strategy))},
                          {"epochs", s.epochs},
                          {"availability", s.availability},
                          {"horizontal_q68_m", s.horizontal_q68},
                          {"horizontal_q95_m", s.horizontal_q95},
                          {"vertical_q68_m", s.vertical_q68},
                          {"vertical_q95_m", s.vertical_q95}});
  }
  return {{"quantile_method", "nearest-rank"}, {"error_frame", "ENU at truth"}, {"strategies", strategies}};
}

void write_report(const BenchmarkReport& report, const std::filesystem::path& dir, const json& metadata) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "records.csv");
    out << "epoch_id,strategy,horizontal_error_m,vertical_error_m,solvable,biased_count\n";
    for (const auto& r : report.records) {
      out << r.epoch_id << ',' << to_string(r.strategy) << ',' << fmt(r.horizontal_error) << ','
          << fmt(r.vertical_error) << ',' << (r.solvable ? 1 : 0) << ',' << r.biased_count << '\n';
    }
  }
  for (const auto& s : report.summaries) {
    auto out = open_out(dir / ("cdf_" + std::string(to_string(s.strategy)) + ".csv"));
    out << "cumulative_probability,horizontal_error_m,vertical_error_m\n";
    const double n = static_cast<double>(s.horizontal.size());
    for (std::size_t i = 0; i < s.horizontal.size(); ++i) {
      out << fmt(static_cast<double>(i + 1) / n) << ',' << fmt(s.horizontal[i]) << ',' << fmt(s.vertical[i]) << '\n';
    }
  }
  json summary = summary_json(report);
  summary["metadata"] = metadata;
  auto out = open_out(dir / "summary.json");
  out << summary.dump(2) << '\n';
}

void write_sweep_table(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "biased_fraction,strategy,horizontal_q95_m,vertical_q95_m,availability\n";
  for (const auto& r : rows) {
    out << fmt(r.biased_fraction) << ',' << to_string(r.strategy) << ',' << fmt(r.horizontal_q95) << ','
        << fmt(r.vertical_q95) << ',' << fmt(r.availability) << '\n';
  }
}

Epoch CanonicalGeometry::epoch() const {
  if (azimuths_deg.size() != elevations_deg.size() || azimuths_deg.size() < 4) {
    throw Error(ErrorCategory::invalid_argument, "canonical geometry needs matching azimuth/elevation lists");
  }
  Epoch e;
  const NavState truth{geodetic_to_ecef(site), 0.0};
  e.truth_state = truth;
  const Eigen::Matrix3d to_ecef = enu_rotation(truth.position).transpose();
  const Eigen::Vector3d p = truth.position.vec();
  for (std::size_t i = 0; i < azimuths_deg.size(); ++i) {
    const double az = azimuths_deg[i] * kPi / 180.0;
    const double el = elevations_deg[i] * kPi / 180.0;
    const Eigen::Vector3d u = to_ecef * Eigen::Vector3d(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el));
    const double pu = p.dot(u);
    const double range = -pu + std::sqrt(pu * pu - p.squaredNorm() + orbit_radius * orbit_radius);
    SatelliteChannel ch;
    ch.sat_id = static_cast<std::uint32_t>(i + 1);
    ch.position = EcefPosition::from(p + range * u);
    ch.elevation = el;
    ch.cn0 = 30.0 + 18.0 * std::sin(el);
    ch.pseudo_range = observation_function(truth, ch.position);
    ch.truth = ChannelTruth{0.0, false};
    e.channels.push_back(ch);
  }
  return e;
}

json to_json(const CanonicalGeometry& g) {
  return {{"site", {{"latitude_deg", g.site.latitude * 180.0 / kPi},
                    {"longitude_deg", g.site.longitude * 180.0 / kPi},
                    {"height_m", g.site.height}}},
          {"orbit_radius_m", g.orbit_radius},
          {"azimuths_deg", g.azimuths_deg},
          {"elevations_deg", g.elevations_deg}};
}

CanonicalGeometry canonical_geometry_from_json(const json& j) {
  CanonicalGeometry g;
  const json& site = j.at("site");
  g.site = {site.at("latitude_deg").get<double>() * kPi / 180.0, site.at("longitude_deg").get<double>() * kPi / 180.0,
            site.at("height_m").get<double>()};
  g.orbit_radius = j.at("orbit_radius_m").get<double>();
  g.azimuths_deg = j.at("azimuths_deg").get<std::vector<double>>();
  g.elevations_deg = j.at("elevations_deg").get<std::vector<double>>();
  return g;
}

std::vector<EllipseRow> confidence_ellipses(const EllipseStudyConfig& config, std::span<const Strategy> strategies,
                                            const BenchmarkConfig& bench, const LstmModel* model) {
  config.mixture.validate();
  const Epoch base = config.geometry.epoch();
  const NavState truth = *base.truth_state;
  const Eigen::Matrix3d rot = enu_rotation(truth.position);

  std::vector<EllipseRow> rows;
  {
    const std::vector<double> sigmas(base.size(), config.mixture.sigma);
    const CrlbResult bound = crlb(base, sigmas);
    EllipseRow row;
    row.method = "crlb";
    row.east_north = bound.enu_covariance_bound.topLeftCorner<2, 2>();
    row.ellipse = bound.one_sigma_ellipse;
    rows.push_back(row);
  }

  // Trial t draws its errors from its own stream; every strategy sees the same draws.
  std::vector<LabeledEpoch> trials(config.trials);
  for (std::size_t t = 0; t < config.trials; ++t) {
    auto rng = epoch_stream(config.seed, t);
    std::bernoulli_distribution outlier(config.biased_fraction);
    LabeledEpoch& le = trials[t];
    le.epoch_id = t;
    le.epoch = base;
    for (auto& ch : le.epoch.channels) {
      const bool biased = outlier(rng);
      const double err = sample_mixture(config.mixture, biased, rng);
      ch.pseudo_range = observation_function(truth, ch.position) + err;
      ch.truth = ChannelTruth{pseudo_range_residual(ch.pseudo_range, truth, ch.position), biased};
    }
  }

  for (Strategy s : strategies) {
    std::vector<Eigen::Vector2d> en(config.trials);
    std::vector<std::uint8_t> ok(config.trials, 0);
    const auto count = static_cast<long>(config.trials);
#pragma omp parallel for schedule(dynamic, 32)
    for (long t = 0; t < count; ++t) {
      const auto idx = static_cast<std::size_t>(t);
      try {
        bool solvable = true;
        const WeightVector w = strategy_weights(s, trials[idx], bench, model, solvable);
        if (!solvable) continue;
        const SolverResult r = solve(trials[idx].epoch, w, bench.solver);
        if (!r.converged) continue;
        en[idx] = (rot * (r.state.position.vec() - truth.position.vec())).head<2>();
        ok[idx] = 1;
      } catch (const Error&) {
      }
    }
    EllipseRow row;
    row.method = std::string(to_string(s));
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (std::size_t t = 0; t < config.trials; ++t) {
      if (!ok[t]) continue;
      mean += en[t];
      ++row.trials;
    }
    if (row.trials >= 2) {
      mean /= static_cast<double>(row.trials);
      for (std::size_t t = 0; t < config.trials; ++t) {
        if (!ok[t]) continue;
        const Eigen::Vector2d d = en[t] - mean;
        row.east_north += d * d.transpose();
      }
      row.east_north /= static_cast<double>(row.trials - 1);
      row.ellipse = ellipse_from_covariance(row.east_north);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_ellipses(std::span<const EllipseRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,semi_major_m,semi_minor_m,orientation_rad,cov_ee_m2,cov_en_m2,cov_nn_m2,trials\n";
  for (const auto& r : rows) {
    out << r.method << ',' << fmt(r.ellipse.semi_major) << ',' << fmt(r.ellipse.semi_minor) << ','
        << fmt(r.ellipse.orientation) << ',' << fmt(r.east_north(0, 0)) << ',' << fmt(r.east_north(0, 1)) << ','
        << fmt(r.east_north(1, 1)) << ',' << r.trials << '\n';
  }
}

}  // namespace satweight
