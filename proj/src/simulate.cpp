#include "softstop/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "softstop/csv.hpp"
#include "softstop/rng.hpp"

namespace softstop {

namespace {

void check_common(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths) {
  cfg.validate();
  if (n_paths < 1) throw ConfigError("simulate: n_paths must be at least 1");
  if (!(grid.horizon > 0.0) || grid.steps < 1)
    throw ConfigError("simulate: time grid must have positive horizon and at least one step");
}

PathBatch make_batch(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths,
                     std::uint64_t seed) {
  PathBatch batch;
  batch.n_paths = n_paths;
  batch.dim = cfg.dim();
  batch.grid = grid;
  batch.kind = cfg.kind;
  batch.seed = seed;
  batch.values.assign(n_paths * grid.points() * cfg.dim(), 0.0);
  return batch;
}

}  // namespace

std::vector<double> cholesky_lower(std::vector<double> a, std::size_t n, double jitter) {
  double scale = 1.0;
  for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::fabs(a[j * n + j]));
  const double tol = 1e-12 * scale;

  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j] + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
    if (d > tol) {
      const double root = std::sqrt(d);
      l[j * n + j] = root;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a[i * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
        l[i * n + j] = s / root;
      }
    } else if (d >= -tol) {
      // Semidefinite pivot: flatten the column, but only if the remaining
      // rows are consistent with a rank-deficient PSD matrix.
      l[j * n + j] = 0.0;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a[i * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
        if (std::fabs(s) > 1e-8 * scale) throw FactorizationError(static_cast<int>(j) + 1);
        l[i * n + j] = 0.0;
      }
    } else {
      throw FactorizationError(static_cast<int>(j) + 1);
    }
  }
  return l;
}

PathBatch simulate_gbm(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed) {
  if (cfg.kind != MarketKind::Gbm1d) throw ConfigError("simulate_gbm: kind must be gbm-1d");
  check_common(cfg, grid, n_paths);

  PathBatch batch = make_batch(cfg, grid, n_paths, seed);
  const double dt = grid.dt();
  const double drift = (cfg.rate - cfg.dividend[0] - 0.5 * cfg.sigma[0] * cfg.sigma[0]) * dt;
  const double vol = cfg.sigma[0] * std::sqrt(dt);
  for (std::size_t m = 0; m < n_paths; ++m) {
    const CounterRng rng(seed, m);
    double s = cfg.spot[0];
    batch.at(m, 0) = s;
    for (std::size_t l = 0; l < grid.steps; ++l) {
      s *= std::exp(drift + vol * rng.normal(l));
      batch.at(m, l + 1) = s;
    }
  }
  return batch;
}

PathBatch simulate_correlated_bs(const MarketConfig& cfg, const TimeGrid& grid,
                                 std::size_t n_paths, std::uint64_t seed) {
  if (cfg.kind != MarketKind::BsMultiD)
    throw ConfigError("simulate_correlated_bs: kind must be bs-multid");
  check_common(cfg, grid, n_paths);

  const std::size_t d = cfg.dim();
  std::vector<double> chol;
  if (!cfg.correlation.empty()) {
    std::vector<double> rho(d * d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) rho[i * d + j] = cfg.correlation[i][j];
    chol = cholesky_lower(std::move(rho), d);
  }

  PathBatch batch = make_batch(cfg, grid, n_paths, seed);
  const double dt = grid.dt();
  std::vector<double> drift(d), vol(d);
  for (std::size_t i = 0; i < d; ++i) {
    drift[i] = (cfg.rate - cfg.dividend[i] - 0.5 * cfg.sigma[i] * cfg.sigma[i]) * dt;
    vol[i] = cfg.sigma[i] * std::sqrt(dt);
  }

  std::vector<double> z(d), w(d);
  for (std::size_t m = 0; m < n_paths; ++m) {
    const CounterRng rng(seed, m);
    for (std::size_t i = 0; i < d; ++i) batch.at(m, 0, i) = cfg.spot[i];
    for (std::size_t l = 0; l < grid.steps; ++l) {
      for (std::size_t i = 0; i < d; ++i) z[i] = rng.normal(l * d + i);
      if (chol.empty()) {
        w = z;
      } else {
        for (std::size_t i = 0; i < d; ++i) {
          double acc = 0.0;
          for (std::size_t k = 0; k <= i; ++k) acc += chol[i * d + k] * z[k];
          w[i] = acc;
        }
      }
      for (std::size_t i = 0; i < d; ++i)
        batch.at(m, l + 1, i) = batch.at(m, l, i) * std::exp(drift[i] + vol[i] * w[i]);
    }
  }
  return batch;
}

std::vector<double> fbm_covariance(double hurst, const TimeGrid& grid) {
  if (!(hurst > 0.0 && hurst <= 1.0)) throw ConfigError("fbm: hurst must lie in (0, 1]");
  const std::size_t n = grid.steps;
  const double two_h = 2.0 * hurst;
  std::vector<double> c(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    const double ta = grid.t(a + 1);
    for (std::size_t b = 0; b <= a; ++b) {
      const double tb = grid.t(b + 1);
      const double v =
          0.5 * (std::pow(ta, two_h) + std::pow(tb, two_h) - std::pow(std::fabs(ta - tb), two_h));
      c[a * n + b] = v;
      c[b * n + a] = v;
    }
  }
  return c;
}

PathBatch simulate_fbm(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed) {
  if (cfg.kind != MarketKind::Fbm) throw ConfigError("simulate_fbm: kind must be fbm");
  check_common(cfg, grid, n_paths);

  const std::size_t n = grid.steps;
  std::vector<double> chol;
  try {
    chol = cholesky_lower(fbm_covariance(cfg.hurst, grid), n);
  } catch (const FactorizationError&) {
    chol = cholesky_lower(fbm_covariance(cfg.hurst, grid), n, 1e-12);
  }

  PathBatch batch = make_batch(cfg, grid, n_paths, seed);
  std::vector<double> z(n);
  for (std::size_t m = 0; m < n_paths; ++m) {
    const CounterRng rng(seed, m);
    for (std::size_t k = 0; k < n; ++k) z[k] = rng.normal(k);
    batch.at(m, 0) = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b <= a; ++b) acc += chol[a * n + b] * z[b];
      batch.at(m, a + 1) = acc;
    }
  }
  return batch;
}

PathBatch simulate_paths(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths,
                         std::uint64_t seed) {
  switch (cfg.kind) {
    case MarketKind::Gbm1d: return simulate_gbm(cfg, grid, n_paths, seed);
    case MarketKind::BsMultiD: return simulate_correlated_bs(cfg, grid, n_paths, seed);
    case MarketKind::Fbm: return simulate_fbm(cfg, grid, n_paths, seed);
  }
  throw ConfigError("simulate: unknown market kind");
}

void write_paths_csv(const PathBatch& paths, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "path,time_index,coordinate,value\n";
    for (std::size_t m = 0; m < paths.n_paths; ++m)
      for (std::size_t l = 0; l < paths.grid.points(); ++l)
        for (std::size_t i = 0; i < paths.dim; ++i)
          out << m << ',' << l << ',' << i << ',' << csv_num(paths.at(m, l, i)) << '\n';
  });
}

}  // namespace softstop
