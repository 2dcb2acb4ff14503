#pragma once

#include <stdexcept>
#include <string>

namespace softstop {

/// Rejected user input: bad market parameters, malformed config files,
/// unknown keys, out-of-range temperatures.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Dense Cholesky failure. `order` is the 1-based order of the offending
/// leading principal minor.
struct FactorizationError : std::runtime_error {
  int order;
  explicit FactorizationError(int order_)
      : std::runtime_error("matrix is not positive semidefinite: leading minor of order " +
                           std::to_string(order_) + " has negative pivot"),
        order(order_) {}
};

/// Iterative solve failed (Newton non-convergence, singular tridiagonal
/// system). Carries the worst residual seen.
struct SolverError : std::runtime_error {
  double residual;
  SolverError(const std::string& what, double residual_)
      : std::runtime_error(what), residual(residual_) {}
};

/// Training diagnostics: non-finite loss or divergence. `path` is the index
/// of the offending sample when one can be named, else -1.
struct TrainingError : std::runtime_error {
  long path;
  double loss;
  TrainingError(const std::string& what, long path_, double loss_)
      : std::runtime_error(what), path(path_), loss(loss_) {}
};

/// Artifact or checkpoint I/O failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace softstop
