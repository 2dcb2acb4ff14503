#include "softstop/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <type_traits>

#include "softstop/errors.hpp"
#include "softstop/grid.hpp"

namespace softstop {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config: section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* key) { return item.key() == key; });
    if (!known)
      throw ConfigError("config: unknown key '" + item.key() + "' in section '" + section + "'");
  }
}

template <typename T>
T get_field(const json& j, const std::string& section, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  if constexpr (std::is_unsigned_v<T>) {
    if (j.at(key).is_number_integer() && j.at(key).get<long long>() < 0)
      throw ConfigError("config: '" + std::string(key) + "' in section '" + section +
                        "' must be nonnegative");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + std::string(key) + "' in section '" + section +
                      "'");
  }
}

template <typename T>
std::optional<T> get_optional(const json& j, const std::string& section, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + std::string(key) + "' in section '" + section +
                      "'");
  }
}

/// A per-coordinate field may be a scalar (broadcast over dim) or an array.
std::vector<double> get_broadcast(const json& j, const std::string& section, const char* key,
                                  std::vector<double> fallback, std::size_t dim) {
  if (!j.contains(key)) {
    if (fallback.size() == 1 && dim > 1) fallback.assign(dim, fallback[0]);
    return fallback;
  }
  const json& v = j.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.assign(std::max<std::size_t>(dim, 1), v.get<double>());
  } else if (v.is_array()) {
    try {
      out = v.get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for '" + std::string(key) + "' in section '" + section +
                        "'");
    }
  } else {
    throw ConfigError("config: '" + std::string(key) + "' in section '" + section +
                      "' must be a number or array");
  }
  return out;
}

MarketKind parse_market_kind(const std::string& s) {
  if (s == "gbm-1d") return MarketKind::Gbm1d;
  if (s == "bs-multid") return MarketKind::BsMultiD;
  if (s == "fbm") return MarketKind::Fbm;
  throw ConfigError("config: unknown market kind '" + s + "' (gbm-1d, bs-multid, fbm)");
}

PayoffKind parse_payoff_kind(const std::string& s) {
  if (s == "put") return PayoffKind::Put;
  if (s == "max-call") return PayoffKind::MaxCall;
  if (s == "identity") return PayoffKind::Identity;
  throw ConfigError("config: unknown payoff kind '" + s + "' (put, max-call, identity)");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("config: unknown optimizer '" + s + "' (adam, sgd)");
}

void parse_market(const json& j, MarketConfig& m) {
  check_keys(j, "market",
             {"kind", "payoff", "rate", "strike", "horizon", "hurst", "dim", "spot", "dividend",
              "sigma", "correlation"});
  if (j.contains("kind")) m.kind = parse_market_kind(get_field<std::string>(j, "market", "kind", ""));
  if (j.contains("payoff"))
    m.payoff = parse_payoff_kind(get_field<std::string>(j, "market", "payoff", ""));
  m.rate = get_field<double>(j, "market", "rate", m.rate);
  m.strike = get_field<double>(j, "market", "strike", m.strike);
  m.horizon = get_field<double>(j, "market", "horizon", m.horizon);
  m.hurst = get_field<double>(j, "market", "hurst", m.hurst);
  std::size_t dim = 0;
  if (j.contains("dim")) {
    dim = get_field<std::size_t>(j, "market", "dim", std::size_t{1});
  } else {
    for (const char* key : {"spot", "dividend", "sigma"})
      if (j.contains(key) && j.at(key).is_array()) dim = std::max(dim, j.at(key).size());
    if (j.contains("correlation") && j.at("correlation").is_array())
      dim = std::max(dim, j.at("correlation").size());
    if (dim == 0) dim = m.sigma.size();
  }
  if (dim == 0) throw ConfigError("config: market dim must be positive");
  m.spot = get_broadcast(j, "market", "spot", m.spot, dim);
  m.dividend = get_broadcast(j, "market", "dividend", m.dividend, dim);
  m.sigma = get_broadcast(j, "market", "sigma", m.sigma, dim);
  if (j.contains("correlation")) {
    try {
      m.correlation = j.at("correlation").get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
      throw ConfigError("config: 'correlation' must be a square array of arrays");
    }
  }
  m.validate();
}

void parse_solver(const json& j, SolverConfig& s) {
  check_keys(j, "solver",
             {"lambda", "tol", "max_newton", "penalty", "exp_clamp", "time_steps", "half_nodes",
              "x_halfwidth", "boundary_tol", "classical", "policy_iters"});
  s.hjb.lambda = get_field<double>(j, "solver", "lambda", s.hjb.lambda);
  s.hjb.tol = get_field<double>(j, "solver", "tol", s.hjb.tol);
  s.hjb.max_newton = get_field<std::size_t>(j, "solver", "max_newton", s.hjb.max_newton);
  s.hjb.penalty = get_field<double>(j, "solver", "penalty", s.hjb.penalty);
  s.hjb.exp_clamp = get_field<double>(j, "solver", "exp_clamp", s.hjb.exp_clamp);
  s.time_steps = get_field<std::size_t>(j, "solver", "time_steps", s.time_steps);
  s.half_nodes = get_field<std::size_t>(j, "solver", "half_nodes", s.half_nodes);
  s.x_halfwidth = get_field<double>(j, "solver", "x_halfwidth", s.x_halfwidth);
  s.boundary_tol = get_field<double>(j, "solver", "boundary_tol", s.boundary_tol);
  s.classical = get_field<bool>(j, "solver", "classical", s.classical);
  s.policy_iters = get_field<std::size_t>(j, "solver", "policy_iters", s.policy_iters);
  if (s.hjb.lambda <= 0.0) throw ConfigError("config: solver lambda must be positive");
  if (s.hjb.tol <= 0.0) throw ConfigError("config: solver tol must be positive");
  if (s.hjb.penalty <= 0.0) throw ConfigError("config: solver penalty must be positive");
  if (s.hjb.max_newton == 0) throw ConfigError("config: solver max_newton must be positive");
  if (s.time_steps < 2) throw ConfigError("config: solver time_steps must be at least 2");
  if (s.policy_iters == 0) throw ConfigError("config: solver policy_iters must be positive");
}

void parse_training(const json& j, TrainConfig& t, std::size_t& hidden_width) {
  check_keys(j, "training",
             {"iterations", "batch_size", "learning_rate", "lambda", "optimizer", "grad_clip",
              "eval_every", "test_paths", "stopgrad_policy", "hidden_width", "reference"});
  t.iterations = get_field<std::size_t>(j, "training", "iterations", t.iterations);
  t.batch_size = get_field<std::size_t>(j, "training", "batch_size", t.batch_size);
  t.learning_rate = get_field<double>(j, "training", "learning_rate", t.learning_rate);
  t.lambda = get_field<double>(j, "training", "lambda", t.lambda);
  if (j.contains("optimizer"))
    t.optimizer = parse_optimizer(get_field<std::string>(j, "training", "optimizer", ""));
  t.grad_clip = get_field<double>(j, "training", "grad_clip", t.grad_clip);
  t.eval_every = get_field<std::size_t>(j, "training", "eval_every", t.eval_every);
  t.test_paths = get_field<std::size_t>(j, "training", "test_paths", t.test_paths);
  t.stopgrad_policy = get_field<bool>(j, "training", "stopgrad_policy", t.stopgrad_policy);
  hidden_width = get_field<std::size_t>(j, "training", "hidden_width", hidden_width);
  t.reference = get_optional<double>(j, "training", "reference");
  if (t.lambda <= 0.0) throw ConfigError("config: training lambda must be positive");
  if (t.learning_rate <= 0.0) throw ConfigError("config: learning_rate must be positive");
  if (t.batch_size == 0) throw ConfigError("config: batch_size must be positive");
  if (t.eval_every == 0) throw ConfigError("config: eval_every must be positive");
}

void parse_evaluation(const json& j, EvalConfig& e) {
  check_keys(j, "evaluation",
             {"modes", "test_paths", "include_entropy", "reference", "checkpoint"});
  if (j.contains("modes")) {
    try {
      e.modes = j.at("modes").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ConfigError("config: 'modes' must be an array of strings");
    }
  }
  for (const std::string& m : e.modes)
    if (m != "randomized" && m != "threshold" && m != "cox")
      throw ConfigError("config: unknown evaluation mode '" + m +
                        "' (randomized, threshold, cox)");
  if (e.modes.empty()) throw ConfigError("config: evaluation modes must be nonempty");
  e.test_paths = get_field<std::size_t>(j, "evaluation", "test_paths", e.test_paths);
  e.include_entropy = get_field<bool>(j, "evaluation", "include_entropy", e.include_entropy);
  e.reference = get_optional<double>(j, "evaluation", "reference");
  e.checkpoint = get_field<std::string>(j, "evaluation", "checkpoint", e.checkpoint);
  if (e.test_paths < 2) throw ConfigError("config: evaluation test_paths must be at least 2");
}

void parse_table(const json& j, std::vector<TableRow>& rows) {
  if (!j.is_array()) throw ConfigError("config: 'table' must be an array");
  rows.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string section = "table[" + std::to_string(i) + "]";
    const json& rj = j.at(i);
    check_keys(rj, section, {"dim", "spot", "hurst", "reference", "iterations", "lambda"});
    TableRow row;
    row.dim = get_optional<std::size_t>(rj, section, "dim");
    row.spot = get_optional<double>(rj, section, "spot");
    row.hurst = get_optional<double>(rj, section, "hurst");
    row.reference = get_optional<double>(rj, section, "reference");
    row.iterations = get_optional<std::size_t>(rj, section, "iterations");
    row.lambda = get_optional<double>(rj, section, "lambda");
    rows.push_back(row);
  }
}

json market_json(const MarketConfig& m) {
  json j;
  j["kind"] = to_string(m.kind);
  j["payoff"] = to_string(m.payoff);
  j["rate"] = m.rate;
  j["strike"] = m.strike;
  j["horizon"] = m.horizon;
  j["hurst"] = m.hurst;
  j["dim"] = m.dim();
  j["spot"] = m.spot;
  j["dividend"] = m.dividend;
  j["sigma"] = m.sigma;
  if (!m.correlation.empty()) j["correlation"] = m.correlation;
  return j;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(j, "top level",
             {"market", "grid", "solver", "training", "evaluation", "table", "output_dir", "seed",
              "deterministic"});
  RunConfig cfg;
  // Defaults: the at-the-money American put used throughout.
  cfg.market.kind = MarketKind::Gbm1d;
  cfg.market.payoff = PayoffKind::Put;
  cfg.market.rate = 0.06;
  cfg.market.strike = 40.0;
  cfg.market.horizon = 1.0;
  cfg.market.spot = {40.0};
  cfg.market.dividend = {0.0};
  cfg.market.sigma = {0.4};

  if (j.contains("market")) parse_market(j.at("market"), cfg.market);
  if (j.contains("grid")) {
    check_keys(j.at("grid"), "grid", {"steps"});
    cfg.grid.steps = get_field<std::size_t>(j.at("grid"), "grid", "steps", cfg.grid.steps);
    if (cfg.grid.steps == 0) throw ConfigError("config: grid steps must be positive");
  }
  cfg.grid.horizon = cfg.market.horizon;
  if (j.contains("solver")) parse_solver(j.at("solver"), cfg.solver);
  if (j.contains("training")) parse_training(j.at("training"), cfg.training, cfg.hidden_width);
  if (j.contains("evaluation")) parse_evaluation(j.at("evaluation"), cfg.evaluation);
  if (j.contains("table")) parse_table(j.at("table"), cfg.table);
  cfg.output_dir = get_field<std::string>(j, "top level", "output_dir", cfg.output_dir);
  cfg.seed = get_field<std::uint64_t>(j, "top level", "seed", cfg.seed);
  cfg.deterministic = get_field<bool>(j, "top level", "deterministic", cfg.deterministic);
  cfg.training.seed = cfg.seed;
  cfg.training.deterministic = cfg.deterministic;
  if (!cfg.training.reference && cfg.evaluation.reference)
    cfg.training.reference = cfg.evaluation.reference;
  cfg.market.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["market"] = market_json(cfg.market);
  j["grid"] = {{"steps", cfg.grid.steps}};
  j["solver"] = {{"lambda", cfg.solver.hjb.lambda},
                 {"tol", cfg.solver.hjb.tol},
                 {"max_newton", cfg.solver.hjb.max_newton},
                 {"penalty", cfg.solver.hjb.penalty},
                 {"exp_clamp", cfg.solver.hjb.exp_clamp},
                 {"time_steps", cfg.solver.time_steps},
                 {"half_nodes", cfg.solver.half_nodes},
                 {"x_halfwidth", cfg.solver.x_halfwidth},
                 {"boundary_tol", cfg.solver.boundary_tol},
                 {"classical", cfg.solver.classical},
                 {"policy_iters", cfg.solver.policy_iters}};
  json training = {{"iterations", cfg.training.iterations},
                   {"batch_size", cfg.training.batch_size},
                   {"learning_rate", cfg.training.learning_rate},
                   {"lambda", cfg.training.lambda},
                   {"optimizer", to_string(cfg.training.optimizer)},
                   {"grad_clip", cfg.training.grad_clip},
                   {"eval_every", cfg.training.eval_every},
                   {"test_paths", cfg.training.test_paths},
                   {"stopgrad_policy", cfg.training.stopgrad_policy},
                   {"hidden_width", cfg.hidden_width}};
  if (cfg.training.reference) training["reference"] = *cfg.training.reference;
  j["training"] = training;
  json evaluation = {{"modes", cfg.evaluation.modes},
                     {"test_paths", cfg.evaluation.test_paths},
                     {"include_entropy", cfg.evaluation.include_entropy},
                     {"checkpoint", cfg.evaluation.checkpoint}};
  if (cfg.evaluation.reference) evaluation["reference"] = *cfg.evaluation.reference;
  j["evaluation"] = evaluation;
  if (!cfg.table.empty()) {
    json rows = json::array();
    for (const TableRow& r : cfg.table) {
      json rj = json::object();
      if (r.dim) rj["dim"] = *r.dim;
      if (r.spot) rj["spot"] = *r.spot;
      if (r.hurst) rj["hurst"] = *r.hurst;
      if (r.reference) rj["reference"] = *r.reference;
      if (r.iterations) rj["iterations"] = *r.iterations;
      if (r.lambda) rj["lambda"] = *r.lambda;
      rows.push_back(rj);
    }
    j["table"] = rows;
  }
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["deterministic"] = cfg.deterministic;
  return j.dump(2) + "\n";
}

SpaceTimeGrid make_space_grid(const RunConfig& cfg) {
  if (cfg.market.dim() != 1)
    throw ConfigError("pde: the grid solvers handle one-dimensional markets only");
  double halfwidth = cfg.solver.x_halfwidth;
  if (halfwidth <= 0.0)
    halfwidth = default_halfwidth(cfg.market.sigma[0], cfg.market.horizon, cfg.market.spot[0],
                                  cfg.market.strike);
  std::size_t half_nodes = cfg.solver.half_nodes;
  if (half_nodes == 0)
    half_nodes = static_cast<std::size_t>(std::lround(std::ceil(halfwidth / 0.01)));
  return build_grid(cfg.market.strike, cfg.market.horizon, cfg.solver.time_steps, half_nodes,
                    halfwidth);
}

}  // namespace softstop
