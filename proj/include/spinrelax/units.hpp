#pragma once

#include <numbers>

namespace spinrelax {

// Frequencies are ordinary (not angular) frequencies in GHz, fields in Tesla,
// temperatures in Kelvin, relaxation rates in 1/ms, decay delays in us and
// bath correlation times in ps.

/// Bohr magneton over Planck's constant, GHz per Tesla.
inline constexpr double kBohrMagnetonGHzPerTesla = 13.9962;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// GHz * ps -> dimensionless.
inline constexpr double kGHzTimesPs = 1e-3;

}  // namespace spinrelax
