#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "softstop/market.hpp"

namespace softstop {

/// Dense lower-triangular Cholesky factor of the n x n row-major matrix `a`
/// (+ jitter on the diagonal). Semidefinite pivots within a relative
/// tolerance of zero are flattened to zero columns, which keeps perfectly
/// correlated or rank-deficient inputs usable; a genuinely negative pivot
/// throws FactorizationError naming the offending leading minor.
std::vector<double> cholesky_lower(std::vector<double> a, std::size_t n, double jitter = 0.0);

/// Exact log-normal stepping S_{l+1} = S_l * exp((r - sigma^2/2) dt + sigma sqrt(dt) Z).
PathBatch simulate_gbm(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed);

/// d-dimensional Black-Scholes with continuous dividend yields and correlated
/// drivers: coordinate i uses drift r - delta_i - sigma_i^2/2 and normals
/// mixed by the lower Cholesky factor of the correlation matrix.
PathBatch simulate_correlated_bs(const MarketConfig& cfg, const TimeGrid& grid,
                                 std::size_t n_paths, std::uint64_t seed);

/// Covariance over the interior grid times t_1..t_L (t_0 = 0 excluded):
/// C[a][b] = (t_a^{2H} + t_b^{2H} - |t_a - t_b|^{2H}) / 2, row-major L x L.
std::vector<double> fbm_covariance(double hurst, const TimeGrid& grid);

/// Fractional Brownian paths by dense Cholesky of fbm_covariance; exact zero
/// at t_0. A near-singular covariance (H at or near 1) is retried with a
/// diagonal jitter of 1e-12.
PathBatch simulate_fbm(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed);

/// Dispatch on cfg.kind.
PathBatch simulate_paths(const MarketConfig& cfg, const TimeGrid& grid, std::size_t n_paths,
                         std::uint64_t seed);

/// Debug dump, columns: path, time_index, coordinate, value.
void write_paths_csv(const PathBatch& paths, const std::filesystem::path& path);

}  // namespace softstop
