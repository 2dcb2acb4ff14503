#include "softstop/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "softstop/csv.hpp"
#include "softstop/errors.hpp"
#include "softstop/policy_math.hpp"
#include "softstop/rng.hpp"

namespace softstop {

namespace {

RewardEstimate summarize(const std::vector<double>& samples) {
  RewardEstimate est;
  est.n_paths = samples.size();
  if (samples.empty()) return est;
  double sum = 0.0;
  for (double v : samples) sum += v;
  est.mean = sum / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double v : samples) {
      const double d = v - est.mean;
      ss += d * d;
    }
    const double var = ss / static_cast<double>(samples.size() - 1);
    est.std_error = std::sqrt(var / static_cast<double>(samples.size()));
  }
  return est;
}

double survival_factor(double pi, double dt, std::size_t m, std::size_t l) {
  const double w = pi * dt;
  if (!(w >= 0.0 && w <= 1.0))
    throw ConfigError("survival: pi*dt = " + std::to_string(w) + " outside [0,1] at path " +
                      std::to_string(m) + ", step " + std::to_string(l));
  return 1.0 - w;
}

Eigen::MatrixXd payoff_matrix(const PathBatch& paths, PayoffKind payoff, double strike) {
  Eigen::MatrixXd g(paths.n_paths, paths.grid.points());
  for (std::size_t m = 0; m < paths.n_paths; ++m)
    for (std::size_t l = 0; l <= paths.grid.steps; ++l)
      g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l)) =
          payoff_on_path(paths, payoff, strike, m, l);
  return g;
}

}  // namespace

SurvivalWeights survival_weights(const Eigen::MatrixXd& pi, double dt) {
  if (dt <= 0.0) throw ConfigError("survival: step size must be positive");
  SurvivalWeights w;
  w.n_paths = static_cast<std::size_t>(pi.rows());
  w.steps = static_cast<std::size_t>(pi.cols());
  w.p.assign(w.n_paths * (w.steps + 1), 1.0);
  for (std::size_t m = 0; m < w.n_paths; ++m)
    for (std::size_t l = 0; l < w.steps; ++l)
      w.at(m, l + 1) =
          w.at(m, l) *
          survival_factor(pi(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l)), dt, m, l);
  return w;
}

RewardEstimate randomized_reward_values(const Eigen::MatrixXd& g, double rate, double dt,
                                        const Eigen::MatrixXd& pi, double lambda,
                                        bool include_entropy) {
  if (g.rows() != pi.rows() || g.cols() != pi.cols() + 1)
    throw ConfigError("reward: payoff matrix must have one more column than the policy matrix");
  if (dt <= 0.0) throw ConfigError("reward: step size must be positive");
  const std::size_t n = static_cast<std::size_t>(g.rows());
  const std::size_t steps = static_cast<std::size_t>(pi.cols());
  std::vector<double> rewards(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    double acc = 0.0;
    double surv = 1.0;
    for (std::size_t l = 0; l < steps; ++l) {
      const double p = pi(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l));
      const double disc = std::exp(-rate * static_cast<double>(l) * dt);
      double running = g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l)) * p;
      if (include_entropy) running += lambda * entropy_term(p);
      acc += disc * running * surv * dt;
      surv *= survival_factor(p, dt, m, l);
    }
    const double disc_t = std::exp(-rate * static_cast<double>(steps) * dt);
    acc += disc_t * g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(steps)) * surv;
    rewards[m] = acc;
  }
  return summarize(rewards);
}

RewardEstimate randomized_reward(const PathBatch& paths, PayoffKind payoff, double strike,
                                 double rate, const Eigen::MatrixXd& pi, double lambda,
                                 bool include_entropy) {
  if (static_cast<std::size_t>(pi.rows()) != paths.n_paths ||
      static_cast<std::size_t>(pi.cols()) != paths.grid.steps)
    throw ConfigError("reward: policy matrix must be n_paths x steps");
  return randomized_reward_values(payoff_matrix(paths, payoff, strike), rate, paths.grid.dt(), pi,
                                  lambda, include_entropy);
}

RewardEstimate threshold_stop_reward(const PathBatch& paths, PayoffKind payoff, double strike,
                                     double rate, const PathValue& value) {
  if (!value) throw ConfigError("threshold: missing value provider");
  std::vector<double> rewards(paths.n_paths, 0.0);
  for (std::size_t m = 0; m < paths.n_paths; ++m) {
    for (std::size_t l = 0; l <= paths.grid.steps; ++l) {
      const double g = payoff_on_path(paths, payoff, strike, m, l);
      const bool stop = (l == paths.grid.steps) || g >= value(paths, m, l);
      if (stop) {
        rewards[m] = std::exp(-rate * paths.grid.t(l)) * g;
        break;
      }
    }
  }
  return summarize(rewards);
}

CoxSample sample_cox_times(const Eigen::MatrixXd& pi, double dt, std::uint64_t seed) {
  if (dt <= 0.0) throw ConfigError("cox: step size must be positive");
  const std::size_t n = static_cast<std::size_t>(pi.rows());
  const std::size_t steps = static_cast<std::size_t>(pi.cols());
  CoxSample sample;
  sample.theta.resize(n);
  sample.index.assign(n, steps);
  sample.at_horizon.assign(n, 1);
  for (std::size_t m = 0; m < n; ++m) {
    CounterRng rng(seed, m);
    const double theta = rng.exponential(0);
    sample.theta[m] = theta;
    double cum = 0.0;
    for (std::size_t l = 1; l <= steps; ++l) {
      const double p = pi(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l - 1));
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ConfigError("cox: intensity must be finite and nonnegative at path " +
                          std::to_string(m) + ", step " + std::to_string(l - 1));
      cum += p * dt;
      if (cum >= theta) {
        sample.index[m] = l;
        sample.at_horizon[m] = 0;
        break;
      }
    }
  }
  return sample;
}

RewardEstimate cox_reward(const PathBatch& paths, PayoffKind payoff, double strike, double rate,
                          const Eigen::MatrixXd& pi, double lambda, bool include_entropy,
                          std::uint64_t seed) {
  if (static_cast<std::size_t>(pi.rows()) != paths.n_paths ||
      static_cast<std::size_t>(pi.cols()) != paths.grid.steps)
    throw ConfigError("cox: policy matrix must be n_paths x steps");
  const double dt = paths.grid.dt();
  const CoxSample sample = sample_cox_times(pi, dt, seed);
  std::vector<double> rewards(paths.n_paths, 0.0);
  for (std::size_t m = 0; m < paths.n_paths; ++m) {
    const std::size_t idx = sample.index[m];
    double acc = std::exp(-rate * paths.grid.t(idx)) * payoff_on_path(paths, payoff, strike, m, idx);
    if (include_entropy)
      for (std::size_t k = 0; k < idx; ++k)
        acc += lambda *
               entropy_term(pi(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k))) *
               std::exp(-rate * paths.grid.t(k)) * dt;
    rewards[m] = acc;
  }
  return summarize(rewards);
}

EvalReport make_report(std::string mode, bool include_entropy, double lambda,
                       const RewardEstimate& est) {
  EvalReport r;
  r.mode = std::move(mode);
  r.include_entropy = include_entropy;
  r.lambda = lambda;
  r.n_paths = est.n_paths;
  r.estimate = est.mean;
  r.std_error = est.std_error;
  return r;
}

std::vector<EvalReport> comparison_report(std::vector<EvalReport> rows, double reference) {
  for (EvalReport& r : rows) {
    r.abs_gap = std::abs(r.estimate - reference);
    r.rel_gap = reference != 0.0 ? r.abs_gap / std::abs(reference)
                                 : std::numeric_limits<double>::quiet_NaN();
  }
  return rows;
}

std::string report_table(const std::vector<EvalReport>& rows, std::optional<double> reference) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "mode" << std::right << std::setw(10) << "lambda"
      << std::setw(14) << "estimate" << std::setw(12) << "se" << std::setw(12) << "abs_gap"
      << std::setw(12) << "rel_gap" << '\n';
  out << std::fixed;
  for (const EvalReport& r : rows) {
    out << std::left << std::setw(12) << r.mode << std::right << std::setprecision(4)
        << std::setw(10) << r.lambda << std::setprecision(6) << std::setw(14) << r.estimate
        << std::setw(12) << r.std_error;
    if (std::isfinite(r.abs_gap))
      out << std::setw(12) << r.abs_gap << std::setprecision(3) << std::setw(11)
          << 100.0 * r.rel_gap << '%';
    else
      out << std::setw(12) << "-" << std::setw(12) << "-";
    out << '\n';
  }
  if (reference)
    out << std::left << std::setw(12) << "reference" << std::right << std::setw(10) << "-"
        << std::setprecision(6) << std::setw(14) << *reference << '\n';
  return out.str();
}

void write_report_csv(const std::vector<EvalReport>& rows, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "mode,lambda,estimate,se,abs_gap,rel_gap\n";
    for (const EvalReport& r : rows)
      out << r.mode << ',' << csv_num(r.lambda) << ',' << csv_num(r.estimate) << ','
          << csv_num(r.std_error) << ',' << csv_num(r.abs_gap) << ',' << csv_num(r.rel_gap)
          << '\n';
  });
}

void write_cox_csv(const CoxSample& sample, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "path,theta,stop_index,at_horizon\n";
    for (std::size_t m = 0; m < sample.theta.size(); ++m)
      out << m << ',' << csv_num(sample.theta[m]) << ',' << sample.index[m] << ','
          << static_cast<int>(sample.at_horizon[m]) << '\n';
  });
}

PathValue pde_value_provider(const ValueField& field) {
  return [field](const PathBatch& paths, std::size_t m, std::size_t l) -> double {
    const SpaceTimeGrid& g = field.grid;
    const double t = paths.grid.t(l);
    const auto row_signed = static_cast<long long>(std::llround(t / g.dt()));
    const std::size_t i = static_cast<std::size_t>(
        std::clamp<long long>(row_signed, 0, static_cast<long long>(g.time_steps)));
    const double s = paths.at(m, l, 0);
    const double x_lo = g.x(0);
    const double x_hi = g.x(g.columns() - 1);
    const double x = s > 0.0 ? std::clamp(std::log(s), x_lo, x_hi) : x_lo;
    const double pos = (x - x_lo) / g.dx();
    const std::size_t j =
        std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos))), g.columns() - 2);
    const double frac = std::clamp(pos - static_cast<double>(j), 0.0, 1.0);
    return (1.0 - frac) * field.at(i, j) + frac * field.at(i, j + 1);
  };
}

PathValue net_value_provider(const ValueNet& net, PayoffKind payoff, double strike) {
  return [net, payoff, strike](const PathBatch& paths, std::size_t m, std::size_t l) -> double {
    const double g = payoff_on_path(paths, payoff, strike, m, l);
    if (l >= net.steps.size()) return g;
    const StepNet& step = net.steps[l];
    Eigen::MatrixXd x(1, static_cast<Eigen::Index>(step.layout.input_dim));
    switch (payoff) {
      case PayoffKind::Put:
        x(0, 0) = paths.at(m, l, 0);
        x(0, 1) = g;
        break;
      case PayoffKind::MaxCall:
        for (std::size_t i = 0; i < paths.dim; ++i)
          x(0, static_cast<Eigen::Index>(i)) = paths.at(m, l, i);
        x(0, static_cast<Eigen::Index>(paths.dim)) = g;
        break;
      case PayoffKind::Identity:
        for (std::size_t k = 1; k <= step.layout.input_dim; ++k)
          x(0, static_cast<Eigen::Index>(k - 1)) = paths.at(m, k, 0);
        break;
    }
    Eigen::VectorXd pay(1);
    pay(0) = g;
    return value_batch(step, x, pay)(0);
  };
}

Eigen::MatrixXd net_policy_matrix(const ValueNet& net, const PathBatch& paths, PayoffKind payoff,
                                  double strike, double exp_clamp) {
  if (net.steps.size() != paths.grid.steps)
    throw ConfigError("policy: network has " + std::to_string(net.steps.size()) +
                      " steps but the path grid has " + std::to_string(paths.grid.steps));
  const double pi_cap = 1.0 / paths.grid.dt();
  Eigen::MatrixXd pi(paths.n_paths, paths.grid.steps);
  for (std::size_t l = 0; l < paths.grid.steps; ++l) {
    Eigen::VectorXd g;
    const Eigen::MatrixXd x = feature_matrix(paths, payoff, strike, l, &g);
    const Eigen::VectorXd v = value_at(net, l, x, g);
    pi.col(static_cast<Eigen::Index>(l)) =
        policy_from_value(v.array(), g.array(), net.lambda, pi_cap, exp_clamp);
  }
  return pi;
}

}  // namespace softstop
