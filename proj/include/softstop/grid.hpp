#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "softstop/errors.hpp"

namespace softstop {

/// Uniform log-price lattice centered at x = log K: columns x_j = center +
/// (j - N) dx for j = 0..2N, rows t_i = i dt with t_{M_t} = T.
struct SpaceTimeGrid {
  double strike = 1.0;
  double horizon = 1.0;
  std::size_t time_steps = 2;   // M_t
  std::size_t half_nodes = 2;   // N
  double x_halfwidth = 1.0;
  double center = 0.0;          // log strike (0 when strike is 0)

  double dx() const { return x_halfwidth / static_cast<double>(half_nodes); }
  double dt() const { return horizon / static_cast<double>(time_steps); }
  std::size_t columns() const { return 2 * half_nodes + 1; }
  std::size_t rows() const { return time_steps + 1; }
  double x(std::size_t j) const {
    return center + (static_cast<double>(j) - static_cast<double>(half_nodes)) * dx();
  }
  double t(std::size_t i) const { return static_cast<double>(i) * dt(); }

  bool same_as(const SpaceTimeGrid& o) const {
    return strike == o.strike && horizon == o.horizon && time_steps == o.time_steps &&
           half_nodes == o.half_nodes && x_halfwidth == o.x_halfwidth;
  }
};

SpaceTimeGrid build_grid(double strike, double horizon, std::size_t time_steps,
                         std::size_t half_nodes, double x_halfwidth);

/// Default spatial truncation: ceil(4 sigma sqrt(T) + |log(s0/K)|).
double default_halfwidth(double sigma, double horizon, double spot, double strike);

/// Value samples u[i][j] over a SpaceTimeGrid with the put obstacle cached per
/// column. lambda is 0 for classical solutions.
struct ValueField {
  SpaceTimeGrid grid;
  double lambda = 0.0;
  std::vector<double> u;       // rows() x columns(), row-major
  std::vector<double> payoff;  // columns()

  double at(std::size_t i, std::size_t j) const { return u[i * grid.columns() + j]; }
  double& at(std::size_t i, std::size_t j) { return u[i * grid.columns() + j]; }
};

/// Nonnegative stopping intensity on the same lattice.
struct PolicySurface {
  SpaceTimeGrid grid;
  double lambda = 0.0;
  std::vector<double> pi;  // rows() x columns(), row-major

  double at(std::size_t i, std::size_t j) const { return pi[i * grid.columns() + j]; }
  double& at(std::size_t i, std::size_t j) { return pi[i * grid.columns() + j]; }
};

/// Per-iteration progress of an iterative scheme.
struct IterationTrace {
  struct Row {
    std::size_t n = 0;
    double increment = 0.0;            // sup-norm change from the previous iterate
    double error_vs_reference = 0.0;   // NaN when no reference was supplied
    std::size_t inner_iterations = 0;  // linear solves consumed this iteration
  };
  std::vector<Row> rows;
};

/// Max absolute difference over selected time rows (all rows when `rows` is
/// empty). Grids must match.
double sup_distance(const ValueField& a, const ValueField& b,
                    const std::vector<std::size_t>& rows = {});

/// Exercise-boundary curve: for each time row the largest x with
/// u <= h + tol_b, linearly interpolated between columns. Rows where u > h +
/// tol_b everywhere yield NaN ("no boundary").
std::vector<double> extract_boundary(const ValueField& field, double tol_b);

void write_value_csv(const ValueField& field, const PolicySurface* policy,
                     const std::filesystem::path& path);
void write_boundary_csv(const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& curves, const SpaceTimeGrid& grid,
                        const std::filesystem::path& path);
void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path);

}  // namespace softstop
