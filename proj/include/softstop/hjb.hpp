#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "softstop/grid.hpp"
#include "softstop/market.hpp"

namespace softstop {

/// Knobs shared by the grid solvers. `tol` is the relative sup-norm stopping
/// threshold of the inner generalized-Newton iteration, `penalty` the
/// obstacle weight of the classical solver, `exp_clamp` the cap on the
/// magnitude of exponents fed to exp().
struct HjbConfig {
  double lambda = 0.005;
  double tol = 1e-8;
  std::size_t max_newton = 50;
  double penalty = 1e6;
  double exp_clamp = 60.0;
};

/// Tridiagonal discretization of -L_x with L_x = sigma^2/2 d_xx +
/// (r - delta - sigma^2/2) d_x - r. Central differences, falling back to
/// one-sided drift differences at any node where the central stencil breaks
/// the M-matrix sign pattern. Boundary rows are zeroed; the time steppers pin
/// them to the obstacle.
struct SpatialOperator {
  std::vector<double> sub, diag, super;

  /// (A u)_j at an interior node.
  double apply(const std::vector<double>& u, std::size_t j) const {
    return sub[j] * u[j - 1] + diag[j] * u[j] + super[j] * u[j + 1];
  }
};

SpatialOperator assemble_operator(const MarketConfig& cfg, const SpaceTimeGrid& grid);

struct ExploratorySolution {
  ValueField value;
  PolicySurface policy;
};

/// Exploratory Hamilton-Jacobi-Bellman solve: backward in time, one
/// generalized-Newton iteration per step linearizing the source
/// lambda exp(-(u - h)/lambda), boundary rows fixed to the obstacle. Returns
/// the converged field plus the intensity exp(-(u - h)/lambda). The overload
/// with an explicit obstacle vector supports custom terminal data; the
/// default obstacle is the put payoff on the grid columns.
ExploratorySolution solve_exploratory_hjb(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                                          const HjbConfig& hjb);
ExploratorySolution solve_exploratory_hjb(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                                          const HjbConfig& hjb, std::vector<double> obstacle);

/// Classical obstacle-problem price via penalty: the same Newton outer loop
/// applied to the reaction penalty (h - u)^+ weighted by hjb.penalty.
ValueField solve_classical_vi(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                              const HjbConfig& hjb);
ValueField solve_classical_vi(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                              const HjbConfig& hjb, std::vector<double> obstacle);

/// Linear backward solve without obstacle or source (European price).
ValueField solve_european(const MarketConfig& cfg, const SpaceTimeGrid& grid);

/// Policy evaluation: one implicit linear solve per time step with the
/// intensity frozen: reaction pi, source h pi + lambda (pi - pi log pi).
ValueField policy_eval_pde(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                           const PolicySurface& policy, double lambda);

/// Pointwise improvement pi = exp(clamp(-(u - h)/lambda, +-exp_clamp)).
PolicySurface policy_improve(const ValueField& field, double lambda, double exp_clamp = 60.0);

struct PolicyIterationResult {
  ValueField value;
  PolicySurface policy;
  IterationTrace trace;
};

/// Alternates policy_improve / policy_eval_pde from u0 (default: the obstacle
/// extended constantly in time). Stops when the sup-norm increment falls
/// below hjb.tol or after n_iters sweeps. When `reference` is supplied the
/// trace records sup distances to it.
PolicyIterationResult policy_iterate(const MarketConfig& cfg, const SpaceTimeGrid& grid,
                                     const HjbConfig& hjb, std::size_t n_iters,
                                     const ValueField* u0 = nullptr,
                                     const ValueField* reference = nullptr);

}  // namespace softstop
