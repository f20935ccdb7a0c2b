#pragma once

#include <numbers>

namespace twomem {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// CODATA 2018 reduced Planck constant (J s).
inline constexpr double kHbar = 1.054571817e-34;
/// Speed of light in vacuum (m/s).
inline constexpr double kSpeedOfLight = 299792458.0;

/// Hz -> rad/s.
constexpr double angular(double hz) { return kTwoPi * hz; }
/// rad/s -> Hz.
constexpr double hertz(double rad_per_s) { return rad_per_s / kTwoPi; }

}  // namespace twomem
