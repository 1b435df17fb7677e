#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace satweight {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s, SI exact
inline constexpr double kPi = 3.14159265358979323846;

namespace wgs84 {
inline constexpr double kSemiMajorAxis = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kEccentricitySq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

struct EcefPosition {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static EcefPosition from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool finite() const;
  bool operator==(const EcefPosition&) const = default;
};

/// Receiver position plus clock bias in seconds.
struct NavState {
  EcefPosition position;
  double clock_bias = 0.0;

  bool finite() const;
  bool operator==(const NavState&) const = default;
};

/// Synthetic ground truth attached to a channel: realized pseudo-range error
/// and whether it came from the outlier branch.
struct ChannelTruth {
  double error = 0.0;
  bool biased = false;

  bool operator==(const ChannelTruth&) const = default;
};

struct SatelliteChannel {
  std::uint32_t sat_id = 0;
  EcefPosition position;
  double pseudo_range = 0.0;  // m
  double elevation = 0.0;     // rad
  double cn0 = 0.0;           // dB-Hz
  double acceleration = 0.0;  // m/s^2
  std::optional<ChannelTruth> truth;

  bool operator==(const SatelliteChannel&) const = default;
};

inline constexpr std::size_t kMinEpochSatellites = 5;

struct Epoch {
  std::vector<SatelliteChannel> channels;
  std::optional<NavState> truth_state;

  std::size_t size() const { return channels.size(); }

  /// Throws invalid_argument on fewer than five channels, duplicate ids or
  /// out-of-range channel fields.
  void validate() const;

  bool operator==(const Epoch&) const = default;
};

/// Geometric range plus c * clock bias.
double observation_function(const NavState& state, const EcefPosition& sat);

/// pseudo_range - observation_function(state, sat), evaluated in extended
/// precision so the result is not limited by the rounding of a ~2e7 m range.
double pseudo_range_residual(double pseudo_range, const NavState& state, const EcefPosition& sat);

/// d(observation)/d[x, y, z, clock_bias]: [-u, c] with u the receiver-to-satellite
/// unit vector.
Eigen::Vector4d jacobian_row(const NavState& state, const EcefPosition& sat);

struct Geodetic {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad
  double height = 0.0;     // m above the ellipsoid
};

EcefPosition geodetic_to_ecef(const Geodetic& g);
Geodetic ecef_to_geodetic(const EcefPosition& p);

/// Rows are the east, north and up unit vectors at the origin.
Eigen::Matrix3d enu_rotation(const EcefPosition& origin);

Eigen::Vector3d ecef_to_enu(const EcefPosition& point, const EcefPosition& origin);
inline Eigen::Vector3d ecef_to_enu(const EcefPosition& point, const NavState& origin) {
  return ecef_to_enu(point, origin.position);
}

}  // namespace satweight
