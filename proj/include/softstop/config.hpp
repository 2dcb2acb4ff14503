#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "softstop/hjb.hpp"
#include "softstop/market.hpp"
#include "softstop/train.hpp"

namespace softstop {

/// PDE-solver settings plus the space-time grid shape.  half_nodes = 0 or
/// x_halfwidth = 0 means "derive from the market" (halfwidth rule
/// ceil(4 sigma sqrt(T) + |log(s0/K)|), node count targeting dx = 0.01).
struct SolverConfig {
  HjbConfig hjb;
  std::size_t time_steps = 200;
  std::size_t half_nodes = 0;
  double x_halfwidth = 0.0;
  double boundary_tol = 1e-8;
  bool classical = true;
  std::size_t policy_iters = 25;
};

struct EvalConfig {
  std::vector<std::string> modes{"randomized"};
  std::size_t test_paths = 1u << 16;
  bool include_entropy = false;
  std::optional<double> reference;
  std::string checkpoint;  // empty: evaluate the PDE solution instead
};

/// One row of a batch experiment: overrides applied on top of the base
/// market/training sections.
struct TableRow {
  std::optional<std::size_t> dim;
  std::optional<double> spot;
  std::optional<double> hurst;
  std::optional<double> reference;
  std::optional<std::size_t> iterations;
  std::optional<double> lambda;
};

struct RunConfig {
  MarketConfig market;
  TimeGrid grid{1.0, 50};
  SolverConfig solver;
  TrainConfig training;
  std::size_t hidden_width = 0;  // 0: per-model default widths
  EvalConfig evaluation;
  std::vector<TableRow> table;
  std::string output_dir;
  std::uint64_t seed = 1;
  bool deterministic = true;
};

/// Parses a JSON config document.  Unknown keys anywhere are hard errors (so
/// typos cannot silently fall back to defaults); missing keys take defaults.
RunConfig parse_run_config(const std::string& text);

RunConfig load_run_config(const std::filesystem::path& path);

/// The full configuration with every default resolved, as a JSON document;
/// feeding it back to parse_run_config reproduces the same RunConfig.
std::string resolved_config_json(const RunConfig& cfg);

/// Space-time grid for the PDE solvers per the solver section (applying the
/// default halfwidth/node rules when unset).
SpaceTimeGrid make_space_grid(const RunConfig& cfg);

}  // namespace softstop
