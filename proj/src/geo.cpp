#include "satweight/geo.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "satweight/errors.hpp"

namespace satweight {

bool EcefPosition::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

bool NavState::finite() const { return position.finite() && std::isfinite(clock_bias); }

void Epoch::validate() const {
  if (channels.size() < kMinEpochSatellites) {
    throw Error(ErrorCategory::invalid_argument,
                "epoch has " + std::to_string(channels.size()) + " satellites, need at least 5");
  }
  std::unordered_set<std::uint32_t> ids;
  for (const auto& ch : channels) {
    if (!ids.insert(ch.sat_id).second) {
      throw Error(ErrorCategory::invalid_argument,
                  "duplicate satellite id " + std::to_string(ch.sat_id));
    }
    if (!ch.position.finite() || !std::isfinite(ch.pseudo_range) || ch.pseudo_range <= 0.0) {
      throw Error(ErrorCategory::invalid_argument,
                  "satellite " + std::to_string(ch.sat_id) + " has a non-finite or non-positive pseudo-range");
    }
    if (!(ch.elevation >= 0.0 && ch.elevation <= kPi / 2 + 1e-12) || !(ch.cn0 >= 0.0)) {
      throw Error(ErrorCategory::invalid_argument,
                  "satellite " + std::to_string(ch.sat_id) + " has elevation or C/N0 out of range");
    }
  }
}

namespace {

Eigen::Vector3d line_of_sight(const NavState& state, const EcefPosition& sat, double& range) {
  const Eigen::Vector3d d = sat.vec() - state.position.vec();
  range = d.norm();
  if (!(range > 0.0)) {
    throw Error(ErrorCategory::degenerate_geometry, "receiver and satellite positions coincide");
  }
  return d / range;
}

}  // namespace

double observation_function(const NavState& state, const EcefPosition& sat) {
  double range = 0.0;
  line_of_sight(state, sat, range);
  return range + kSpeedOfLight * state.clock_bias;
}

double pseudo_range_residual(double pseudo_range, const NavState& state, const EcefPosition& sat) {
  double range = 0.0;
  line_of_sight(state, sat, range);
  const long double dx = static_cast<long double>(sat.x) - state.position.x;
  const long double dy = static_cast<long double>(sat.y) - state.position.y;
  const long double dz = static_cast<long double>(sat.z) - state.position.z;
  const long double c = kSpeedOfLight;
  return static_cast<double>(pseudo_range - (std::sqrt(dx * dx + dy * dy + dz * dz) + c * state.clock_bias));
}

Eigen::Vector4d jacobian_row(const NavState& state, const EcefPosition& sat) {
  double range = 0.0;
  const Eigen::Vector3d u = line_of_sight(state, sat, range);
  return {-u.x(), -u.y(), -u.z(), kSpeedOfLight};
}

EcefPosition geodetic_to_ecef(const Geodetic& g) {
  const double sin_lat = std::sin(g.latitude);
  const double cos_lat = std::cos(g.latitude);
  const double n = wgs84::kSemiMajorAxis / std::sqrt(1.0 - wgs84::kEccentricitySq * sin_lat * sin_lat);
  return {(n + g.height) * cos_lat * std::cos(g.longitude),
          (n + g.height) * cos_lat * std::sin(g.longitude),
          (n * (1.0 - wgs84::kEccentricitySq) + g.height) * sin_lat};
}

Geodetic ecef_to_geodetic(const EcefPosition& p) {
  const double rho = std::hypot(p.x, p.y);
  if (rho == 0.0 && p.z == 0.0) {
    throw Error(ErrorCategory::invalid_argument, "geodetic conversion undefined at the Earth center");
  }
  Geodetic g;
  g.longitude = std::atan2(p.y, p.x);
  // Fixed-point iteration on latitude; converges to ~1e-15 rad within a handful of passes.
  double lat = std::atan2(p.z, rho * (1.0 - wgs84::kEccentricitySq));
  double n = wgs84::kSemiMajorAxis;
  for (int it = 0; it < 10; ++it) {
    const double s = std::sin(lat);
    n = wgs84::kSemiMajorAxis / std::sqrt(1.0 - wgs84::kEccentricitySq * s * s);
    const double next = std::atan2(p.z + wgs84::kEccentricitySq * n * s, rho);
    if (std::abs(next - lat) < 1e-15) {
      lat = next;
      break;
    }
    lat = next;
  }
  g.latitude = lat;
  const double s = std::sin(lat);
  n = wgs84::kSemiMajorAxis / std::sqrt(1.0 - wgs84::kEccentricitySq * s * s);
  const double c = std::cos(lat);
  g.height = std::abs(c) > 1e-10 ? rho / c - n : std::abs(p.z) - n * (1.0 - wgs84::kEccentricitySq);
  return g;
}

Eigen::Matrix3d enu_rotation(const EcefPosition& origin) {
  const Geodetic g = ecef_to_geodetic(origin);
  const double sl = std::sin(g.latitude), cl = std::cos(g.latitude);
  const double so = std::sin(g.longitude), co = std::cos(g.longitude);
  Eigen::Matrix3d r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

Eigen::Vector3d ecef_to_enu(const EcefPosition& point, const EcefPosition& origin) {
  return enu_rotation(origin) * (point.vec() - origin.vec());
}

}  // namespace satweight
