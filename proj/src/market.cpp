#include "softstop/market.hpp"

#include <cmath>

namespace softstop {

std::string to_string(MarketKind kind) {
  switch (kind) {
    case MarketKind::Gbm1d: return "gbm-1d";
    case MarketKind::BsMultiD: return "bs-multid";
    case MarketKind::Fbm: return "fbm";
  }
  return "?";
}

std::string to_string(PayoffKind kind) {
  switch (kind) {
    case PayoffKind::Put: return "put";
    case PayoffKind::MaxCall: return "max-call";
    case PayoffKind::Identity: return "identity";
  }
  return "?";
}

void MarketConfig::validate() const {
  const std::size_t d = sigma.size();
  if (d == 0) throw ConfigError("market: at least one coordinate required");
  if (spot.size() != d || dividend.size() != d)
    throw ConfigError("market: spot, dividend and sigma must have matching lengths");
  if (!(horizon > 0.0)) throw ConfigError("market: horizon must be positive");
  if (strike < 0.0) throw ConfigError("market: strike must be nonnegative");
  for (double s : sigma)
    if (!(s > 0.0)) throw ConfigError("market: sigma must be positive");
  if (kind != MarketKind::Fbm)
    for (double s : spot)
      if (!(s > 0.0)) throw ConfigError("market: spot must be positive");
  if ((kind == MarketKind::Gbm1d || kind == MarketKind::Fbm) && d != 1)
    throw ConfigError("market: " + to_string(kind) + " is one-dimensional");
  if (kind == MarketKind::Fbm && !(hurst > 0.0 && hurst <= 1.0))
    throw ConfigError("market: hurst must lie in (0, 1]");
  if (!correlation.empty()) {
    if (correlation.size() != d)
      throw ConfigError("market: correlation must be " + std::to_string(d) + "x" +
                        std::to_string(d));
    for (std::size_t i = 0; i < d; ++i) {
      if (correlation[i].size() != d)
        throw ConfigError("market: correlation must be square");
      if (std::fabs(correlation[i][i] - 1.0) > 1e-12)
        throw ConfigError("market: correlation diagonal must be 1");
      for (std::size_t j = 0; j < d; ++j)
        if (std::fabs(correlation[i][j] - correlation[j][i]) > 1e-12)
          throw ConfigError("market: correlation must be symmetric");
    }
  }
}

}  // namespace softstop
