#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "softstop/errors.hpp"

namespace softstop {

/// Tridiagonal system in banded storage; row i couples unknowns i-1, i, i+1.
/// lower[0] and upper[n-1] are ignored.
struct Tridiagonal {
  std::vector<double> lower, diag, upper;
  std::size_t size() const { return diag.size(); }
};

/// Thomas elimination without pivoting, valid for the diagonally dominant
/// M-matrices this project assembles. Throws SolverError on a vanishing pivot.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& m, std::vector<double> rhs) {
  const std::size_t n = m.size();
  std::vector<double> c(n, 0.0);
  double pivot = m.diag[0];
  if (pivot == 0.0) throw SolverError("singular tridiagonal system at row 0", 0.0);
  if (n > 1) c[0] = m.upper[0] / pivot;
  rhs[0] /= pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = m.diag[i] - m.lower[i] * c[i - 1];
    if (pivot == 0.0)
      throw SolverError("singular tridiagonal system at row " + std::to_string(i), 0.0);
    if (i + 1 < n) c[i] = m.upper[i] / pivot;
    rhs[i] = (rhs[i] - m.lower[i] * rhs[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
  return rhs;
}

}  // namespace softstop
