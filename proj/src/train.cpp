#include "softstop/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "softstop/csv.hpp"
#include "softstop/errors.hpp"
#include "softstop/policy_math.hpp"
#include "softstop/rng.hpp"
#include "softstop/simulate.hpp"

namespace softstop {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kDivergenceGuard = 1e6;

StepGrads make_grads(const NetLayout& layout) {
  StepGrads g;
  g.w1.setZero(static_cast<Eigen::Index>(layout.hidden1), static_cast<Eigen::Index>(layout.input_dim));
  g.b1.setZero(static_cast<Eigen::Index>(layout.hidden1));
  g.w2.setZero(static_cast<Eigen::Index>(layout.hidden2), static_cast<Eigen::Index>(layout.hidden1));
  g.b2.setZero(static_cast<Eigen::Index>(layout.hidden2));
  g.w3.setZero(static_cast<Eigen::Index>(layout.hidden2));
  g.b3 = 0.0;
  return g;
}

double grads_squared_norm(const StepGrads& g) {
  return g.w1.squaredNorm() + g.b1.squaredNorm() + g.w2.squaredNorm() + g.b2.squaredNorm() +
         g.w3.squaredNorm() + g.b3 * g.b3;
}

void scale_grads(StepGrads& g, double s) {
  g.w1 *= s;
  g.b1 *= s;
  g.w2 *= s;
  g.b2 *= s;
  g.w3 *= s;
  g.b3 *= s;
}

template <typename P, typename G>
void adam_tensor(P&& param, const G& grad, G& m, G& v, double lr, double b1c, double b2c) {
  m.array() = kBeta1 * m.array() + (1.0 - kBeta1) * grad.array();
  v.array() = kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square();
  param.array() -= lr * (m.array() / b1c) / ((v.array() / b2c).sqrt() + kAdamEps);
}

void adam_scalar(double& param, double grad, double& m, double& v, double lr, double b1c,
                 double b2c) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
  param -= lr * (m / b1c) / (std::sqrt(v / b2c) + kAdamEps);
}

std::size_t expected_input_dim(PayoffKind payoff, std::size_t dim, std::size_t l) {
  switch (payoff) {
    case PayoffKind::Put: return 2;
    case PayoffKind::MaxCall: return dim + 1;
    case PayoffKind::Identity: return l;
  }
  return 0;
}

}  // namespace

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

AdamState make_adam_state(const NetLayout& layout) {
  return AdamState{make_grads(layout), make_grads(layout)};
}

double td_loss(const StepNet& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& payoff,
               const Eigen::VectorXd& v_next, const TdOptions& opt, StepGrads* grads) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw ConfigError("td: empty batch");
  if (payoff.size() != n || v_next.size() != n)
    throw ConfigError("td: payoff and next-step value lengths must match the batch");
  if (opt.pi_override != nullptr && opt.pi_override->size() != n)
    throw ConfigError("td: intensity override length must match the batch");
  if (opt.lambda <= 0.0) throw ConfigError("td: temperature must be positive");
  if (opt.dt <= 0.0) throw ConfigError("td: step size must be positive");

  ForwardCache cache;
  const Eigen::VectorXd value = value_batch(net, x, payoff, grads != nullptr ? &cache : nullptr);

  Eigen::ArrayXd pi(n);
  Eigen::ArrayXd log_pi(n);
  Eigen::ArrayXd dpi_dv = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    if (opt.pi_override != nullptr) {
      const double p = (*opt.pi_override)(m);
      pi(m) = p;
      log_pi(m) = p > 0.0 ? std::log(p) : 0.0;
      continue;
    }
    const double z = -(value(m) - payoff(m)) / opt.lambda;
    const double zc = std::clamp(z, -opt.exp_clamp, opt.exp_clamp);
    const double raw = std::exp(zc);
    if (raw < opt.pi_cap) {
      pi(m) = raw;
      log_pi(m) = zc;
      if (z > -opt.exp_clamp && z < opt.exp_clamp && !opt.stopgrad_policy)
        dpi_dv(m) = -raw / opt.lambda;
    } else {
      pi(m) = opt.pi_cap;
      log_pi(m) = std::log(opt.pi_cap);
    }
  }

  Eigen::ArrayXd resid(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const double p = pi(m);
    const double entropy = p > 0.0 ? p - p * log_pi(m) : 0.0;
    resid(m) = payoff(m) * p * opt.dt + opt.lambda * entropy * opt.dt +
               opt.discount * v_next(m) * (1.0 - p * opt.dt) - value(m);
    if (!std::isfinite(resid(m)))
      throw TrainingError("non-finite TD residual at path " + std::to_string(m), m,
                          std::numeric_limits<double>::quiet_NaN());
  }
  const double loss = resid.square().mean();

  if (grads != nullptr) {
    // dL/dV = (2/n) resid * (dresid/dpi * dpi/dV - 1), with
    // dresid/dpi = dt (g - lambda log pi - discount V_next).
    Eigen::VectorXd dvalue(n);
    for (Eigen::Index m = 0; m < n; ++m) {
      const double dresid_dpi =
          opt.dt * (payoff(m) - opt.lambda * log_pi(m) - opt.discount * v_next(m));
      const double dresid_dv = dresid_dpi * dpi_dv(m) - 1.0;
      dvalue(m) = 2.0 * resid(m) * dresid_dv / static_cast<double>(n);
    }
    const Eigen::VectorXd dout = dvalue;  // V = g + out (or out alone); g is constant
    grads->w3 = cache.a2.transpose() * dout;
    grads->b3 = dout.sum();
    Eigen::MatrixXd dz2 =
        (dout * net.w3.transpose()).cwiseProduct((cache.a2.array() > 0.0).cast<double>().matrix());
    grads->w2 = dz2.transpose() * cache.a1;
    grads->b2 = dz2.colwise().sum().transpose();
    Eigen::MatrixXd dz1 =
        (dz2 * net.w2).cwiseProduct((cache.a1.array() > 0.0).cast<double>().matrix());
    grads->w1 = dz1.transpose() * x;
    grads->b1 = dz1.colwise().sum().transpose();
  }
  return loss;
}

void apply_update(StepNet& net, StepGrads grads, AdamState& state, OptimizerKind kind, double lr,
                  double grad_clip, std::size_t step_count) {
  if (grad_clip > 0.0) {
    const double norm = std::sqrt(grads_squared_norm(grads));
    if (norm > grad_clip) scale_grads(grads, grad_clip / norm);
  }
  if (kind == OptimizerKind::Sgd) {
    net.w1 -= lr * grads.w1;
    net.b1 -= lr * grads.b1;
    net.w2 -= lr * grads.w2;
    net.b2 -= lr * grads.b2;
    net.w3 -= lr * grads.w3;
    net.b3 -= lr * grads.b3;
    return;
  }
  const double t = static_cast<double>(std::max<std::size_t>(step_count, 1));
  const double b1c = 1.0 - std::pow(kBeta1, t);
  const double b2c = 1.0 - std::pow(kBeta2, t);
  adam_tensor(net.w1, grads.w1, state.m.w1, state.v.w1, lr, b1c, b2c);
  adam_tensor(net.b1, grads.b1, state.m.b1, state.v.b1, lr, b1c, b2c);
  adam_tensor(net.w2, grads.w2, state.m.w2, state.v.w2, lr, b1c, b2c);
  adam_tensor(net.b2, grads.b2, state.m.b2, state.v.b2, lr, b1c, b2c);
  adam_tensor(net.w3, grads.w3, state.m.w3, state.v.w3, lr, b1c, b2c);
  adam_scalar(net.b3, grads.b3, state.m.b3, state.v.b3, lr, b1c, b2c);
}

void write_curve_csv(const LearningCurve& curve, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "iteration,estimate,relative_error,se,loss\n";
    for (const LearningCurve::Point& p : curve.points)
      out << p.iteration << ',' << csv_num(p.estimate) << ',' << csv_num(p.rel_error) << ','
          << csv_num(p.std_error) << ',' << csv_num(p.loss) << '\n';
  });
}

RewardEstimate net_policy_estimate(const ValueNet& net, const PathBatch& paths,
                                   const MarketConfig& market, bool include_entropy,
                                   double exp_clamp) {
  const Eigen::MatrixXd pi =
      net_policy_matrix(net, paths, market.payoff, market.strike, exp_clamp);
  return randomized_reward(paths, market.payoff, market.strike, market.rate, pi, net.lambda,
                           include_entropy);
}

TrainResult train(const MarketConfig& market, const TimeGrid& grid, const TrainConfig& cfg,
                  const std::vector<NetLayout>& layouts, const ProgressFn& progress) {
  market.validate();
  if (grid.steps == 0) throw ConfigError("train: need at least one time step");
  if (layouts.size() != grid.steps)
    throw ConfigError("train: need one network layout per time step (" +
                      std::to_string(grid.steps) + "), got " + std::to_string(layouts.size()));
  for (std::size_t l = 0; l < layouts.size(); ++l) {
    const std::size_t want = expected_input_dim(market.payoff, market.dim(), l);
    if (layouts[l].input_dim != want)
      throw ConfigError("train: layout at step " + std::to_string(l) + " has input dimension " +
                        std::to_string(layouts[l].input_dim) + ", expected " +
                        std::to_string(want));
  }
  if (cfg.batch_size == 0) throw ConfigError("train: batch size must be positive");
  if (cfg.learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
  if (cfg.lambda <= 0.0) throw ConfigError("train: temperature must be positive");
  if (cfg.eval_every == 0) throw ConfigError("train: eval cadence must be positive");
  if (cfg.test_paths < 2) throw ConfigError("train: need at least two test paths");

  const double dt = grid.dt();
  const double discount = std::exp(-market.rate * dt);
  TrainResult result;
  result.net = init_valuenet(layouts, cfg.lambda, discount, cfg.seed);
  ValueNet& net = result.net;

  const PathBatch test =
      simulate_paths(market, grid, cfg.test_paths, CounterRng::derive(cfg.seed, 0x74657374ull));

  std::vector<AdamState> states;
  states.reserve(layouts.size());
  for (const NetLayout& lay : layouts) states.push_back(make_adam_state(lay));

  TdOptions opt;
  opt.lambda = cfg.lambda;
  opt.dt = dt;
  opt.discount = discount;
  opt.pi_cap = 1.0 / dt;
  opt.exp_clamp = cfg.exp_clamp;
  opt.stopgrad_policy = cfg.stopgrad_policy;

  const std::size_t steps = grid.steps;
  double last_loss = 0.0;
  StepGrads grads;
  auto record_eval = [&](std::size_t iteration) {
    const RewardEstimate est = net_policy_estimate(net, test, market, false, cfg.exp_clamp);
    LearningCurve::Point point;
    point.iteration = iteration;
    point.estimate = est.mean;
    point.std_error = est.std_error;
    if (cfg.reference && *cfg.reference != 0.0)
      point.rel_error = std::abs(est.mean - *cfg.reference) / std::abs(*cfg.reference);
    point.loss = last_loss;
    result.curve.points.push_back(point);
    result.final_estimate = est;
    if (progress) progress(TrainProgress{iteration, cfg.iterations, last_loss, est.mean});
  };

  if (cfg.iterations == 0) {
    record_eval(0);
    return result;
  }

  for (std::size_t n = 1; n <= cfg.iterations; ++n) {
    // Linear anneal to a tenth of the base rate: late updates stop churning
    // the stopping boundary, which the sharp small-temperature policy
    // amplifies into estimate noise.
    const double lr =
        cfg.learning_rate *
        (1.0 - 0.9 * static_cast<double>(n - 1) / static_cast<double>(cfg.iterations));
    const PathBatch batch =
        simulate_paths(market, grid, cfg.batch_size, CounterRng::derive(cfg.seed, n));
    Eigen::MatrixXd next_x;
    Eigen::VectorXd next_g;
    feature_matrix(batch, market.payoff, market.strike, steps, &next_g);
    for (std::size_t back = 0; back < steps; ++back) {
      const std::size_t l = steps - 1 - back;
      Eigen::VectorXd g_l;
      Eigen::MatrixXd x_l = feature_matrix(batch, market.payoff, market.strike, l, &g_l);
      // Target from the step-(l+1) parameters updated earlier in this sweep.
      const Eigen::VectorXd v_next = value_at(net, l + 1, next_x, next_g);
      last_loss = td_loss(net.steps[l], x_l, g_l, v_next, opt, &grads);
      if (!std::isfinite(last_loss) || last_loss > kDivergenceGuard)
        throw TrainingError("training diverged at iteration " + std::to_string(n) + ", step " +
                                std::to_string(l) + ": loss " + std::to_string(last_loss),
                            -1, last_loss);
      apply_update(net.steps[l], std::move(grads), states[l], cfg.optimizer, lr,
                   cfg.grad_clip, n);
      next_x = std::move(x_l);
      next_g = std::move(g_l);
    }
    if (n % cfg.eval_every == 0 || n == cfg.iterations) record_eval(n);
  }
  return result;
}

}  // namespace softstop
