#include "softstop/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "softstop/policy_math.hpp"
#include "softstop/tridiag.hpp"

namespace softstop {

namespace {

void check_setup(const MarketConfig& cfg, const SpaceTimeGrid& grid) {
  cfg.validate();
  if (cfg.dim() != 1) throw ConfigError("pde: one-dimensional market required");
  if (std::fabs(grid.horizon - cfg.horizon) > 1e-12 * std::max(1.0, cfg.horizon))
    throw ConfigError("pde: grid horizon differs from market horizon");
  if (grid.strike != cfg.strike) throw ConfigError("pde: grid strike differs from market strike");
}

std::vector<double> put_obstacle(const SpaceTimeGrid& grid) {
  std::vector<double> h(grid.columns());
  for (std::size_t j = 0; j < grid.columns(); ++j)
    h[j] = std::max(grid.strike - std::exp(grid.x(j)), 0.0);
  return h;
}

ValueField make_field(const SpaceTimeGrid& grid, double lambda, std::vector<double> obstacle) {
  if (obstacle.size() != grid.columns())
    throw ConfigError("pde: obstacle length must match grid columns");
  ValueField f;
  f.grid = grid;
  f.lambda = lambda;
  f.payoff = std::move(obstacle);
  f.u.assign(grid.rows() * grid.columns(), 0.0);
  for (std::size_t j = 0; j < grid.columns(); ++j) f.at(grid.time_steps, j) = f.payoff[j];
  return f;
}

/// One backward-Euler step: solves, for interior nodes,
///   (1/dt + reaction_j + A_jj) u_j + A_{j,j-1} u_{j-1} + A_{j,j+1} u_{j+1}
///     = u_next_j / dt + source_j,
/// with both boundary rows pinned to the obstacle.
std::vector<double> implicit_step(const SpatialOperator& a, const std::vector<double>& u_next,
                                  const std::vector<double>& reaction,
                                  const std::vector<double>& source,
                                  const std::vector<double>& obstacle, double dt) {
  const std::size_t n = u_next.size();
  const double inv_dt = 1.0 / dt;
  Tridiagonal sys;
  sys.lower.assign(n, 0.0);
  sys.diag.assign(n, 0.0);
  sys.upper.assign(n, 0.0);
  std::vector<double> rhs(n, 0.0);
  sys.diag[0] = 1.0;
  rhs[0] = obstacle[0];
  sys.diag[n - 1] = 1.0;
  rhs[n - 1] = obstacle[n - 1];
  for (std::size_t j = 1; j + 1 < n; ++j) {
    sys.lower[j] = a.sub[j];
    sys.diag[j] = inv_dt + reaction[j] + a.diag[j];
    sys.upper[j] = a.super[j];
    rhs[j] = u_next[j] * inv_dt + source[j];
  }
  return solve_tridiagonal(sys, std::move(rhs));
}

double relative_sup_increment(const std::vector<double>& next, const std::vector<double>& prev) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < next.size(); ++j) {
    diff = std::max(diff, std::fabs(next[j] - prev[j]));
    scale = std::max(scale, std::fabs(prev[j]));
  }
  return diff / std::max(1.0, scale);
}

/// Sup norm of the nonlinear backward-Euler residual
/// (u - u_next)/dt + A u - lambda exp(-(u - h)/lambda) at interior nodes.
double exploratory_residual(const SpatialOperator& a, const std::vector<double>& u,
                            const std::vector<double>& u_next, const std::vector<double>& h,
                            double dt, const HjbConfig& hjb) {
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < u.size(); ++j) {
    const double source = hjb.lambda * clamped_exp(-(u[j] - h[j]) / hjb.lambda, hjb.exp_clamp);
    const double r = (u[j] - u_next[j]) / dt + a.apply(u, j) - source;
    worst = std::max(worst, std::fabs(r));
  }
  return worst;
}

}  // namespace

SpatialOperator assemble_operator(const MarketConfig& cfg, const SpaceTimeGrid& grid) {
  check_setup(cfg, grid);
  const double sigma = cfg.sigma[0];
  const double drift = cfg.rate - cfg.dividend[0] - 0.5 * sigma * sigma;
  const double dx = grid.dx();
  const double diffusion = sigma * sigma / (2.0 * dx * dx);

  const std::size_t n = grid.columns();
  SpatialOperator a;
  a.sub.assign(n, 0.0);
  a.diag.assign(n, 0.0);
  a.super.assign(n, 0.0);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    double sub = -(diffusion - drift / (2.0 * dx));
    double super = -(diffusion + drift / (2.0 * dx));
    if (sub > 0.0 || super > 0.0) {
      // One-sided drift difference preserves the M-matrix sign pattern.
      if (drift >= 0.0) {
        sub = -diffusion;
        super = -diffusion - drift / dx;
        a.diag[j] = 2.0 * diffusion + drift / dx + cfg.rate;
      } else {
        sub = -diffusion + drift / dx;
        super = -diffusion;
        a.diag[j] = 2.0 * diffusion - drift / dx + cfg.rate;
      }
    } else {
      a.diag[j] = 2.0 * diffusion + cfg.rate;
    }
    a.sub[j] = sub;
    a.super[j] = super;
  }
  return a;
}

ExploratorySolution solve_exploratory_hjb(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                                          const HjbConfig& hjb) {
  return solve_exploratory_hjb(cfg, grid, hjb, put_obstacle(grid));
}

ExploratorySolution solve_exploratory_hjb(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                                          const HjbConfig& hjb, std::vector<double> obstacle) {
  if (!(hjb.lambda > 0.0)) throw ConfigError("solve_exploratory_hjb: lambda must be positive");
  if (!(hjb.tol > 0.0)) throw ConfigError("solve_exploratory_hjb: tol must be positive");
  check_setup(cfg, grid);
  const SpatialOperator a = assemble_operator(cfg, grid);

  ValueField field = make_field(grid, hjb.lambda, std::move(obstacle));
  const std::vector<double>& h = field.payoff;
  const std::size_t n = grid.columns();
  const double dt = grid.dt();

  std::vector<double> u_next(n), current(n), reaction(n, 0.0), source(n, 0.0);
  for (std::size_t i = grid.time_steps; i-- > 0;) {
    for (std::size_t j = 0; j < n; ++j) u_next[j] = field.at(i + 1, j);
    current = u_next;  // Newton start: the already-computed later slice
    bool converged = false;
    double increment = std::numeric_limits<double>::infinity();
    double residual = exploratory_residual(a, current, u_next, h, dt, hjb);
    for (std::size_t k = 0; k < hjb.max_newton && !converged; ++k) {
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const double pi = clamped_exp(-(current[j] - h[j]) / hjb.lambda, hjb.exp_clamp);
        reaction[j] = pi;
        source[j] = pi * (hjb.lambda + current[j]);
      }
      std::vector<double> full = implicit_step(a, u_next, reaction, source, h, dt);
      // A full step that barely moves the iterate is a converged root; the
      // residual there sits at the rounding floor, where demanding a strict
      // decrease would deadlock the backtracking below.
      increment = relative_sup_increment(full, current);
      if (increment < hjb.tol) {
        current.swap(full);
        converged = true;
        break;
      }
      // Backtrack on the residual norm: the full step is kept whenever it
      // already improves, which is the generic case; halving only engages in
      // stiff regimes (tiny lambda) where the full step overshoots.
      std::vector<double> next = full;
      double best_residual = exploratory_residual(a, next, u_next, h, dt, hjb);
      double step = 1.0;
      while (best_residual >= residual && step > 1e-10) {
        step *= 0.5;
        for (std::size_t j = 0; j < n; ++j) next[j] = current[j] + step * (full[j] - current[j]);
        best_residual = exploratory_residual(a, next, u_next, h, dt, hjb);
      }
      increment = relative_sup_increment(next, current);
      current.swap(next);
      residual = best_residual;
      converged = increment < hjb.tol && step == 1.0;
    }
    if (!converged)
      throw SolverError("exploratory solve: Newton iteration stalled at time step " +
                            std::to_string(i),
                        increment);
    for (std::size_t j = 0; j < n; ++j) field.at(i, j) = current[j];
  }

  PolicySurface policy = policy_improve(field, hjb.lambda, hjb.exp_clamp);
  return {std::move(field), std::move(policy)};
}

ValueField solve_classical_vi(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                              const HjbConfig& hjb) {
  return solve_classical_vi(cfg, grid, hjb, put_obstacle(grid));
}

ValueField solve_classical_vi(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                              const HjbConfig& hjb, std::vector<double> obstacle) {
  if (!(hjb.penalty > 0.0)) throw ConfigError("solve_classical_vi: penalty must be positive");
  if (!(hjb.tol > 0.0)) throw ConfigError("solve_classical_vi: tol must be positive");
  check_setup(cfg, grid);
  const SpatialOperator a = assemble_operator(cfg, grid);

  ValueField field = make_field(grid, 0.0, std::move(obstacle));
  const std::vector<double>& h = field.payoff;
  const std::size_t n = grid.columns();
  const double dt = grid.dt();

  std::vector<double> u_next(n), current(n), reaction(n, 0.0), source(n, 0.0);
  for (std::size_t i = grid.time_steps; i-- > 0;) {
    for (std::size_t j = 0; j < n; ++j) u_next[j] = field.at(i + 1, j);
    current = u_next;
    bool converged = false;
    double increment = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < hjb.max_newton && !converged; ++k) {
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const bool active = h[j] > current[j];
        reaction[j] = active ? hjb.penalty : 0.0;
        source[j] = active ? hjb.penalty * h[j] : 0.0;
      }
      std::vector<double> next = implicit_step(a, u_next, reaction, source, h, dt);
      increment = relative_sup_increment(next, current);
      current.swap(next);
      converged = increment < hjb.tol;
    }
    if (!converged)
      throw SolverError("penalty solve: Newton iteration stalled at time step " +
                            std::to_string(i),
                        increment);
    for (std::size_t j = 0; j < n; ++j) field.at(i, j) = current[j];
  }
  return field;
}

ValueField solve_european(const MarketConfig& cfg, const SpaceTimeGrid& grid) {
  PolicySurface zero;
  zero.grid = grid;
  zero.lambda = 0.0;
  zero.pi.assign(grid.rows() * grid.columns(), 0.0);
  return policy_eval_pde(cfg, grid, zero, 0.0);
}

ValueField policy_eval_pde(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                           const PolicySurface& policy, double lambda) {
  check_setup(cfg, grid);
  if (!policy.grid.same_as(grid)) throw ConfigError("policy_eval_pde: policy grid differs");
  for (double pi : policy.pi)
    if (!(pi >= 0.0) || !std::isfinite(pi))
      throw ConfigError("policy_eval_pde: intensities must be finite and nonnegative");
  const SpatialOperator a = assemble_operator(cfg, grid);

  ValueField field = make_field(grid, lambda, put_obstacle(grid));
  const std::vector<double>& h = field.payoff;
  const std::size_t n = grid.columns();
  const double dt = grid.dt();

  std::vector<double> u_next(n), reaction(n, 0.0), source(n, 0.0);
  for (std::size_t i = grid.time_steps; i-- > 0;) {
    for (std::size_t j = 0; j < n; ++j) u_next[j] = field.at(i + 1, j);
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double pi = policy.at(i, j);
      reaction[j] = pi;
      source[j] = h[j] * pi + lambda * entropy_term(pi);
    }
    std::vector<double> next = implicit_step(a, u_next, reaction, source, h, dt);
    for (std::size_t j = 0; j < n; ++j) field.at(i, j) = next[j];
  }
  return field;
}

PolicySurface policy_improve(const ValueField& field, double lambda, double exp_clamp) {
  if (!(lambda > 0.0)) throw ConfigError("policy_improve: lambda must be positive");
  PolicySurface policy;
  policy.grid = field.grid;
  policy.lambda = lambda;
  policy.pi.assign(field.grid.rows() * field.grid.columns(), 0.0);
  for (std::size_t i = 0; i < field.grid.rows(); ++i)
    for (std::size_t j = 0; j < field.grid.columns(); ++j)
      policy.at(i, j) = clamped_exp(-(field.at(i, j) - field.payoff[j]) / lambda, exp_clamp);
  return policy;
}

PolicyIterationResult policy_iterate(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                                     const HjbConfig& hjb, std::size_t n_iters,
                                     const ValueField* u0, const ValueField* reference) {
  if (!(hjb.lambda > 0.0)) throw ConfigError("policy_iterate: lambda must be positive");
  check_setup(cfg, grid);

  ValueField current;
  if (u0) {
    if (!u0->grid.same_as(grid)) throw ConfigError("policy_iterate: u0 grid differs");
    current = *u0;
  } else {
    current = make_field(grid, hjb.lambda, put_obstacle(grid));
    for (std::size_t i = 0; i < grid.rows(); ++i)
      for (std::size_t j = 0; j < grid.columns(); ++j) current.at(i, j) = current.payoff[j];
  }

  PolicyIterationResult result;
  result.trace.rows.reserve(n_iters);
  PolicySurface policy;
  for (std::size_t n = 1; n <= n_iters; ++n) {
    policy = policy_improve(current, hjb.lambda, hjb.exp_clamp);
    ValueField next = policy_eval_pde(cfg, grid, policy, hjb.lambda);
    IterationTrace::Row row;
    row.n = n;
    row.increment = sup_distance(next, current);
    row.error_vs_reference =
        reference ? sup_distance(next, *reference) : std::numeric_limits<double>::quiet_NaN();
    row.inner_iterations = 1;
    result.trace.rows.push_back(row);
    current = std::move(next);
    if (row.increment < hjb.tol) break;
  }
  result.value = std::move(current);
  result.policy = std::move(policy);
  return result;
}

}  // namespace softstop
