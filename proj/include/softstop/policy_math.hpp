#pragma once

#include <algorithm>
#include <cmath>

namespace softstop {

/// Shared cap on the magnitude of exponents fed to exp(); e^{60} already
/// forces exercise within one step on any practical grid.
inline constexpr double kDefaultExpClamp = 60.0;

inline double clamped_exp(double z, double cap) { return std::exp(std::clamp(z, -cap, cap)); }

/// R(pi) = pi - pi log pi, continuously extended by 0 at pi = 0.
inline double entropy_term(double pi) { return pi > 0.0 ? pi - pi * std::log(pi) : 0.0; }

/// Soft stopping intensity exp(-(v - g)/lambda), exponent clamped to
/// +-exp_clamp and the result capped at pi_cap (usually 1/dt, so the discrete
/// survival factor 1 - pi dt stays in [0,1]).
inline double stop_intensity(double v, double g, double lambda, double pi_cap, double exp_clamp) {
  return std::min(clamped_exp(-(v - g) / lambda, exp_clamp), pi_cap);
}

}  // namespace softstop
