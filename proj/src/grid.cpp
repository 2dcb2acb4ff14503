#include "softstop/grid.hpp"

#include <cmath>
#include <limits>

#include "softstop/csv.hpp"

namespace softstop {

SpaceTimeGrid build_grid(double strike, double horizon, std::size_t time_steps,
                         std::size_t half_nodes, double x_halfwidth) {
  if (strike < 0.0) throw ConfigError("grid: strike must be nonnegative");
  if (!(horizon > 0.0)) throw ConfigError("grid: horizon must be positive");
  if (time_steps < 2 || half_nodes < 2)
    throw ConfigError("grid: at least 2 time steps and 2 space half-nodes required");
  if (!(x_halfwidth > 0.0)) throw ConfigError("grid: x_halfwidth must be positive");
  SpaceTimeGrid g;
  g.strike = strike;
  g.horizon = horizon;
  g.time_steps = time_steps;
  g.half_nodes = half_nodes;
  g.x_halfwidth = x_halfwidth;
  g.center = strike > 0.0 ? std::log(strike) : 0.0;
  return g;
}

double default_halfwidth(double sigma, double horizon, double spot, double strike) {
  const double shift = (spot > 0.0 && strike > 0.0) ? std::fabs(std::log(spot / strike)) : 0.0;
  return std::ceil(4.0 * sigma * std::sqrt(horizon) + shift);
}

double sup_distance(const ValueField& a, const ValueField& b,
                    const std::vector<std::size_t>& rows) {
  if (!a.grid.same_as(b.grid)) throw ConfigError("sup_distance: grids differ");
  const std::size_t cols = a.grid.columns();
  double worst = 0.0;
  auto scan_row = [&](std::size_t i) {
    for (std::size_t j = 0; j < cols; ++j)
      worst = std::max(worst, std::fabs(a.at(i, j) - b.at(i, j)));
  };
  if (rows.empty())
    for (std::size_t i = 0; i < a.grid.rows(); ++i) scan_row(i);
  else
    for (std::size_t i : rows) scan_row(i);
  return worst;
}

std::vector<double> extract_boundary(const ValueField& field, double tol_b) {
  const SpaceTimeGrid& g = field.grid;
  const std::size_t cols = g.columns();
  std::vector<double> curve(g.rows(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = cols; j-- > 0;) {
      if (field.at(i, j) <= field.payoff[j] + tol_b) {
        if (j + 1 == cols) {
          curve[i] = g.x(j);
        } else {
          const double lo = field.at(i, j) - field.payoff[j] - tol_b;        // <= 0
          const double hi = field.at(i, j + 1) - field.payoff[j + 1] - tol_b;  // > 0
          curve[i] = g.x(j) + g.dx() * (-lo) / (hi - lo);
        }
        break;
      }
    }
  }
  return curve;
}

void write_value_csv(const ValueField& field, const PolicySurface* policy,
                     const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "t,x,S,u,h,pi\n";
    const SpaceTimeGrid& g = field.grid;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.columns(); ++j) {
        const double x = g.x(j);
        out << csv_num(g.t(i)) << ',' << csv_num(x) << ',' << csv_num(std::exp(x)) << ','
            << csv_num(field.at(i, j)) << ',' << csv_num(field.payoff[j]) << ','
            << csv_num(policy ? policy->at(i, j) : 0.0) << '\n';
      }
  });
}

void write_boundary_csv(const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& curves, const SpaceTimeGrid& grid,
                        const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "t";
    for (const std::string& label : labels) out << ",x_boundary_" << label;
    out << '\n';
    for (std::size_t i = 0; i < grid.rows(); ++i) {
      out << csv_num(grid.t(i));
      for (const auto& curve : curves) out << ',' << csv_num(curve[i]);
      out << '\n';
    }
  });
}

void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "n,increment,error_vs_reference\n";
    for (const auto& row : trace.rows)
      out << row.n << ',' << csv_num(row.increment) << ',' << csv_num(row.error_vs_reference)
          << '\n';
  });
}

}  // namespace softstop
