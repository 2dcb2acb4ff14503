#include "softstop/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "softstop/config.hpp"
#include "softstop/csv.hpp"
#include "softstop/errors.hpp"
#include "softstop/evaluate.hpp"
#include "softstop/hjb.hpp"
#include "softstop/net.hpp"
#include "softstop/policy_math.hpp"
#include "softstop/rng.hpp"
#include "softstop/simulate.hpp"
#include "softstop/train.hpp"

namespace softstop {

namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<double> lambda;
  std::optional<std::size_t> grid_n;
  std::optional<std::size_t> iters;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "Config file (JSON)")->required();
  cmd->add_option("--out", o.out, "Output directory (overrides the config)");
  cmd->add_option("--seed", o.seed, "Seed override");
  cmd->add_flag("--deterministic", o.deterministic, "Force deterministic execution");
  cmd->add_option("--lambda", o.lambda, "Temperature override (PDE and training)");
  cmd->add_option("--grid-n", o.grid_n, "Spatial half-node count override");
  cmd->add_option("--iters", o.iters, "Iteration-count override");
}

RunConfig load_with_overrides(const CommonOpts& o) {
  RunConfig cfg = load_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.training.seed = *o.seed;
  }
  if (o.deterministic) {
    cfg.deterministic = true;
    cfg.training.deterministic = true;
  }
  if (o.lambda) {
    if (*o.lambda <= 0.0) throw ConfigError("cli: lambda must be positive");
    cfg.solver.hjb.lambda = *o.lambda;
    cfg.training.lambda = *o.lambda;
  }
  if (o.grid_n) {
    if (*o.grid_n < 2) throw ConfigError("cli: grid-n must be at least 2");
    cfg.solver.half_nodes = *o.grid_n;
  }
  if (o.iters) {
    cfg.training.iterations = *o.iters;
    cfg.solver.policy_iters = std::max<std::size_t>(*o.iters, 1);
  }
  return cfg;
}

/// Creates the output directory (config > $SOFTSTOP_OUT_ROOT/softstop-<cmd> >
/// ./softstop-<cmd>) and echoes the fully resolved config into it.
fs::path prepare_out_dir(const RunConfig& cfg, const std::string& name) {
  fs::path dir;
  if (!cfg.output_dir.empty()) {
    dir = cfg.output_dir;
  } else {
    const char* root = std::getenv("SOFTSTOP_OUT_ROOT");
    dir = fs::path(root != nullptr ? root : ".") / ("softstop-" + name);
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec && !fs::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const std::string echo = resolved_config_json(cfg);
  write_file_atomic(dir / "resolved_config.json", [&](std::ostream& out) { out << echo; });
  return dir;
}

int cmd_solve_pde(const RunConfig& cfg) {
  const SpaceTimeGrid grid = make_space_grid(cfg);
  const fs::path dir = prepare_out_dir(cfg, "solve-pde");
  std::cout << "grid: " << grid.time_steps << " time steps, " << grid.columns()
            << " space nodes, dx=" << grid.dx() << ", dt=" << grid.dt() << "\n";
  const ExploratorySolution expl = solve_exploratory_hjb(cfg.market, grid, cfg.solver.hjb);
  write_value_csv(expl.value, &expl.policy, dir / "value_lambda.csv");
  std::cout << "u_lambda(log K, 0) = " << expl.value.at(0, grid.half_nodes)
            << "  (lambda=" << cfg.solver.hjb.lambda << ")\n";
  std::vector<std::string> labels{"lambda"};
  std::vector<std::vector<double>> curves{extract_boundary(expl.value, cfg.solver.boundary_tol)};
  if (cfg.solver.classical) {
    const ValueField star = solve_classical_vi(cfg.market, grid, cfg.solver.hjb);
    write_value_csv(star, nullptr, dir / "value_star.csv");
    labels.emplace_back("star");
    curves.push_back(extract_boundary(star, cfg.solver.boundary_tol));
    std::cout << "u_star(log K, 0) = " << star.at(0, grid.half_nodes) << "\n";
    std::cout << "sup gap at t=0: " << sup_distance(expl.value, star, {0}) << "\n";
  }
  write_boundary_csv(labels, curves, grid, dir / "boundaries.csv");
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_policy_iter(const RunConfig& cfg) {
  const SpaceTimeGrid grid = make_space_grid(cfg);
  const fs::path dir = prepare_out_dir(cfg, "policy-iter");
  const ExploratorySolution reference = solve_exploratory_hjb(cfg.market, grid, cfg.solver.hjb);
  const PolicyIterationResult res = policy_iterate(cfg.market, grid, cfg.solver.hjb,
                                                   cfg.solver.policy_iters, nullptr,
                                                   &reference.value);
  write_trace_csv(res.trace, dir / "trace.csv");
  for (const IterationTrace::Row& row : res.trace.rows)
    std::cout << "sweep " << row.n << "  increment " << row.increment << "  error "
              << row.error_vs_reference << "\n";
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

ProgressFn stdout_progress() {
  return [](const TrainProgress& p) {
    std::cout << "iter " << p.iteration << "/" << p.total << "  loss " << p.loss << "  estimate "
              << p.estimate << std::endl;
  };
}

int cmd_train(const RunConfig& cfg) {
  const fs::path dir = prepare_out_dir(cfg, "train");
  const std::vector<NetLayout> layouts = default_layouts(cfg.market, cfg.grid, cfg.hidden_width);
  const TrainResult res = train(cfg.market, cfg.grid, cfg.training, layouts, stdout_progress());
  write_curve_csv(res.curve, dir / "learning_curve.csv");
  save_checkpoint(res.net, dir / "checkpoint.bin");
  std::cout << "final estimate " << res.final_estimate.mean << " (se " << res.final_estimate.std_error
            << ") on " << res.final_estimate.n_paths << " test paths\n";
  if (cfg.training.reference && *cfg.training.reference != 0.0)
    std::cout << "relative error vs " << *cfg.training.reference << ": "
              << std::abs(res.final_estimate.mean - *cfg.training.reference) /
                     std::abs(*cfg.training.reference)
              << "\n";
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  const fs::path dir = prepare_out_dir(cfg, "evaluate");
  const PathBatch paths = simulate_paths(cfg.market, cfg.grid, cfg.evaluation.test_paths,
                                         CounterRng::derive(cfg.seed, 0x6576616cull));
  const double dt = cfg.grid.dt();
  double lambda = 0.0;
  PathValue provider;
  std::optional<ValueNet> net;
  if (!cfg.evaluation.checkpoint.empty()) {
    net = load_checkpoint(cfg.evaluation.checkpoint);
    if (net->steps.size() != cfg.grid.steps)
      throw ConfigError("evaluate: checkpoint has " + std::to_string(net->steps.size()) +
                        " timestep networks but the grid has " + std::to_string(cfg.grid.steps) +
                        " steps");
    lambda = net->lambda;
    provider = net_value_provider(*net, cfg.market.payoff, cfg.market.strike);
  } else {
    if (cfg.market.kind != MarketKind::Gbm1d || cfg.market.payoff != PayoffKind::Put)
      throw ConfigError("evaluate: this market needs a trained checkpoint "
                        "(the grid solver covers one-dimensional puts only)");
    const ExploratorySolution sol =
        solve_exploratory_hjb(cfg.market, make_space_grid(cfg), cfg.solver.hjb);
    lambda = cfg.solver.hjb.lambda;
    provider = pde_value_provider(sol.value);
  }
  Eigen::MatrixXd pi(paths.n_paths, cfg.grid.steps);
  for (std::size_t m = 0; m < paths.n_paths; ++m)
    for (std::size_t l = 0; l < cfg.grid.steps; ++l) {
      const double g = payoff_on_path(paths, cfg.market.payoff, cfg.market.strike, m, l);
      pi(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l)) = stop_intensity(
          provider(paths, m, l), g, lambda, 1.0 / dt, cfg.solver.hjb.exp_clamp);
    }

  std::vector<EvalReport> rows;
  for (const std::string& mode : cfg.evaluation.modes) {
    if (mode == "randomized") {
      rows.push_back(make_report("randomized", cfg.evaluation.include_entropy, lambda,
                                 randomized_reward(paths, cfg.market.payoff, cfg.market.strike,
                                                   cfg.market.rate, pi, lambda,
                                                   cfg.evaluation.include_entropy)));
    } else if (mode == "threshold") {
      rows.push_back(make_report("threshold", false, lambda,
                                 threshold_stop_reward(paths, cfg.market.payoff, cfg.market.strike,
                                                       cfg.market.rate, provider)));
    } else if (mode == "cox") {
      const std::uint64_t cox_seed = CounterRng::derive(cfg.seed, 0x636f78ull);
      rows.push_back(make_report("cox", cfg.evaluation.include_entropy, lambda,
                                 cox_reward(paths, cfg.market.payoff, cfg.market.strike,
                                            cfg.market.rate, pi, lambda,
                                            cfg.evaluation.include_entropy, cox_seed)));
      write_cox_csv(sample_cox_times(pi, dt, cox_seed), dir / "cox_sample.csv");
    }
  }
  if (cfg.evaluation.reference) rows = comparison_report(std::move(rows), *cfg.evaluation.reference);
  std::cout << report_table(rows, cfg.evaluation.reference);
  write_report_csv(rows, dir / "report.csv");
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_sim(const RunConfig& cfg) {
  const fs::path dir = prepare_out_dir(cfg, "sim");
  const PathBatch paths = simulate_paths(cfg.market, cfg.grid, cfg.evaluation.test_paths, cfg.seed);
  write_paths_csv(paths, dir / "paths.csv");
  std::cout << "wrote " << paths.n_paths << " paths (" << paths.grid.points() << " times, dim "
            << paths.dim << ") to " << (dir / "paths.csv").string() << "\n";
  return 0;
}

int cmd_table(const RunConfig& cfg) {
  if (cfg.table.empty()) throw ConfigError("table: the config has no table rows");
  const fs::path dir = prepare_out_dir(cfg, "table");
  struct Result {
    MarketConfig market;
    TrainConfig training;
    RewardEstimate estimate;
    std::optional<double> reference;
  };
  std::vector<Result> results;
  for (std::size_t i = 0; i < cfg.table.size(); ++i) {
    const TableRow& row = cfg.table[i];
    MarketConfig m = cfg.market;
    TrainConfig t = cfg.training;
    if (row.dim) {
      const std::size_t d = *row.dim;
      if (d == 0) throw ConfigError("table: dim must be positive");
      if (!m.correlation.empty() && m.correlation.size() != d)
        throw ConfigError("table: base correlation matrix conflicts with the dim override");
      m.spot.assign(d, m.spot[0]);
      m.dividend.assign(d, m.dividend[0]);
      m.sigma.assign(d, m.sigma[0]);
    }
    if (row.spot) m.spot.assign(m.spot.size(), *row.spot);
    if (row.hurst) m.hurst = *row.hurst;
    if (row.iterations) t.iterations = *row.iterations;
    if (row.lambda) t.lambda = *row.lambda;
    m.validate();
    std::cout << "table row " << (i + 1) << "/" << cfg.table.size() << ": kind "
              << to_string(m.kind) << ", dim " << m.dim();
    if (m.kind == MarketKind::Fbm)
      std::cout << ", hurst " << m.hurst;
    else
      std::cout << ", spot " << m.spot[0];
    std::cout << ", lambda " << t.lambda << ", iterations " << t.iterations << std::endl;
    const std::vector<NetLayout> layouts = default_layouts(m, cfg.grid, cfg.hidden_width);
    const TrainResult res = train(m, cfg.grid, t, layouts, stdout_progress());
    std::cout << "row estimate " << res.final_estimate.mean << " (se "
              << res.final_estimate.std_error << ")\n";
    results.push_back(Result{m, t, res.final_estimate, row.reference});
  }
  write_file_atomic(dir / "table.csv", [&](std::ostream& out) {
    out << "row,kind,payoff,dim,spot,hurst,lambda,iterations,estimate,se,reference,rel_gap\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const Result& r = results[i];
      out << i << ',' << to_string(r.market.kind) << ',' << to_string(r.market.payoff) << ','
          << r.market.dim() << ',' << csv_num(r.market.spot[0]) << ',' << csv_num(r.market.hurst)
          << ',' << csv_num(r.training.lambda) << ',' << r.training.iterations << ','
          << csv_num(r.estimate.mean) << ',' << csv_num(r.estimate.std_error) << ',';
      if (r.reference) {
        const double ref = *r.reference;
        out << csv_num(ref) << ','
            << csv_num(ref != 0.0 ? std::abs(r.estimate.mean - ref) / std::abs(ref)
                                  : std::numeric_limits<double>::quiet_NaN());
      } else {
        out << "nan,nan";
      }
      out << '\n';
    }
  });
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Entropy-regularized optimal stopping: grid solvers, TD training, evaluation"};
  app.name("softstop");
  app.require_subcommand(0, 1);
  CommonOpts opts;
  CLI::App* solve_pde = app.add_subcommand(
      "solve-pde", "Solve the exploratory HJB (and classical obstacle problem); write CSVs");
  CLI::App* policy_iter =
      app.add_subcommand("policy-iter", "Grid-level policy iteration with convergence trace");
  CLI::App* train_cmd =
      app.add_subcommand("train", "Temporal-difference training of per-timestep value nets");
  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Score a policy (checkpoint or grid solution) on simulated paths");
  CLI::App* sim_cmd = app.add_subcommand("sim", "Simulate a path batch and dump it as CSV");
  CLI::App* table_cmd =
      app.add_subcommand("table", "Run a batch of training rows and tabulate the estimates");
  for (CLI::App* cmd : {solve_pde, policy_iter, train_cmd, evaluate_cmd, sim_cmd, table_cmd})
    add_common(cmd, opts);

  if (args.empty()) {
    std::cout << app.help();
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 2;
  }
  try {
    const RunConfig cfg = load_with_overrides(opts);
    if (solve_pde->parsed()) return cmd_solve_pde(cfg);
    if (policy_iter->parsed()) return cmd_policy_iter(cfg);
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg);
    if (sim_cmd->parsed()) return cmd_sim(cfg);
    if (table_cmd->parsed()) return cmd_table(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << app.help();
  return 2;
}

}  // namespace softstop
