#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace bleaoa {

inline constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wrap an angle in degrees into (-180, 180].
inline double wrap_deg(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

/// Wrap an angle in radians into (-pi, pi].
inline double wrap_rad(double rad) {
  double r = std::fmod(rad, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return r;
}

/// Shift `value` by the multiple of 2*pi that brings it closest to `ref`.
inline double unwrap_step(double ref, double value) {
  return value + 2.0 * kPi * std::round((ref - value) / (2.0 * kPi));
}

/// In-place unwrap of a phase sequence (nearest-multiple-of-2*pi rule).
inline void unwrap_in_place(std::span<double> phases) {
  for (std::size_t k = 1; k < phases.size(); ++k) {
    phases[k] = unwrap_step(phases[k - 1], phases[k]);
  }
}

}  // namespace bleaoa
