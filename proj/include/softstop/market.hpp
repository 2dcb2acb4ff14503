#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softstop/errors.hpp"

namespace softstop {

enum class MarketKind { Gbm1d, BsMultiD, Fbm };
enum class PayoffKind { Put, MaxCall, Identity };

std::string to_string(MarketKind kind);
std::string to_string(PayoffKind kind);

/// Equally spaced decision grid t_l = l * T / steps, l = 0..steps.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = 1;

  double dt() const { return horizon / static_cast<double>(steps); }
  double t(std::size_t l) const { return static_cast<double>(l) * dt(); }
  std::size_t points() const { return steps + 1; }
};

/// Market description shared by the simulators, the PDE solvers and the
/// trainer. Vector fields have one entry per coordinate; `hurst` applies to
/// the fractional Brownian model only.
struct MarketConfig {
  MarketKind kind = MarketKind::Gbm1d;
  PayoffKind payoff = PayoffKind::Put;
  double rate = 0.0;
  double strike = 0.0;
  double horizon = 1.0;
  double hurst = 0.5;
  std::vector<double> spot{1.0};
  std::vector<double> dividend{0.0};
  std::vector<double> sigma{0.2};
  std::vector<std::vector<double>> correlation;  // empty means identity

  std::size_t dim() const { return sigma.size(); }

  /// Throws ConfigError on broken invariants (non-positive sigma or horizon,
  /// negative strike, asymmetric correlation, Hurst outside (0,1], ...).
  void validate() const;
};

/// Dense simulated paths, layout values[(m*(L+1) + l)*d + i] for path m,
/// time index l, coordinate i.
struct PathBatch {
  std::size_t n_paths = 0;
  std::size_t dim = 1;
  TimeGrid grid;
  MarketKind kind = MarketKind::Gbm1d;
  std::uint64_t seed = 0;
  std::vector<double> values;

  double at(std::size_t m, std::size_t l, std::size_t i = 0) const {
    return values[(m * grid.points() + l) * dim + i];
  }
  double& at(std::size_t m, std::size_t l, std::size_t i = 0) {
    return values[(m * grid.points() + l) * dim + i];
  }
  std::span<const double> state(std::size_t m, std::size_t l) const {
    return {values.data() + (m * grid.points() + l) * dim, dim};
  }
};

/// (K-S)^+ for puts, (max_i S^i - K)^+ for max-calls, the raw level for the
/// identity reward (may be negative). Total function.
inline double payoff_eval(PayoffKind kind, double strike, std::span<const double> state) {
  switch (kind) {
    case PayoffKind::Put:
      return std::max(strike - state[0], 0.0);
    case PayoffKind::MaxCall: {
      double best = state[0];
      for (double s : state.subspan(1)) best = std::max(best, s);
      return std::max(best - strike, 0.0);
    }
    case PayoffKind::Identity:
      return state[0];
  }
  return 0.0;
}

inline double payoff_on_path(const PathBatch& paths, PayoffKind kind, double strike,
                             std::size_t m, std::size_t l) {
  return payoff_eval(kind, strike, paths.state(m, l));
}

}  // namespace softstop
