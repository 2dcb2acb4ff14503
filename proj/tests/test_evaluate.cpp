// Reward evaluation: survival weights, the randomized functional, threshold
// stopping, exponential-clock realizations, reports, and value providers.
#include <doctest.h>

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "softstop/errors.hpp"
#include "softstop/evaluate.hpp"
#include "softstop/net.hpp"
#include "softstop/simulate.hpp"

using namespace softstop;

namespace {

MarketConfig gbm_market(double spot, double strike) {
  MarketConfig cfg;
  cfg.kind = MarketKind::Gbm1d;
  cfg.payoff = PayoffKind::Put;
  cfg.rate = 0.06;
  cfg.strike = strike;
  cfg.horizon = 1.0;
  cfg.spot = {spot};
  cfg.dividend = {0.0};
  cfg.sigma = {0.2};
  return cfg;
}

PathBatch batch_1d(const std::vector<double>& levels, double horizon) {
  PathBatch b;
  b.n_paths = 1;
  b.dim = 1;
  b.grid = TimeGrid{horizon, levels.size() - 1};
  b.values = levels;
  return b;
}

}  // namespace

TEST_CASE("survival weights compound the hand-computed decay") {
  Eigen::MatrixXd pi(1, 3);
  pi.setConstant(0.5);  // pi dt = 0.05 per step
  const auto w = survival_weights(pi, 0.1);
  REQUIRE(w.n_paths == 1);
  REQUIRE(w.steps == 3);
  CHECK(w.at(0, 0) == 1.0);
  CHECK(w.at(0, 1) == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(w.at(0, 2) == doctest::Approx(0.9025).epsilon(1e-14));
  CHECK(w.at(0, 3) == doctest::Approx(0.857375).epsilon(1e-14));
}

TEST_CASE("survival weights enforce pi dt in [0, 1]") {
  Eigen::MatrixXd pi(1, 2);
  pi << 10.0, 0.0;  // pi dt = 1 exactly: absorbs all mass, still legal
  const auto w = survival_weights(pi, 0.1);
  CHECK(w.at(0, 1) == 0.0);
  CHECK(w.at(0, 2) == 0.0);
  pi(0, 0) = 10.1;
  CHECK_THROWS_AS(survival_weights(pi, 0.1), ConfigError);
  pi(0, 0) = -0.1;
  CHECK_THROWS_AS(survival_weights(pi, 0.1), ConfigError);
}

TEST_CASE("zero intensity pays the discounted terminal payoff exactly") {
  const auto paths = batch_1d({36.0, 50.0, 30.0}, 1.0);
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(1, 2);
  const auto est = randomized_reward(paths, PayoffKind::Put, 40.0, 0.06, pi, 1e-3, false);
  CHECK(est.mean == doctest::Approx(std::exp(-0.06) * 10.0).epsilon(1e-14));
  CHECK(est.std_error == 0.0);
  CHECK(est.n_paths == 1);
}

TEST_CASE("saturated first-step intensity pays the immediate payoff exactly") {
  // pi_0 dt = 1 stops everything at t = 0: reward = g(S_0) with no variance.
  const auto cfg = gbm_market(40.0, 44.0);
  const auto paths = simulate_gbm(cfg, TimeGrid{1.0, 4}, 500, 3);
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(500, 4);
  pi.col(0).setConstant(4.0);  // 1/dt
  const auto est = randomized_reward(paths, PayoffKind::Put, 44.0, 0.06, pi, 1e-3, false);
  CHECK(est.mean == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(est.std_error == doctest::Approx(0.0));

  // The entropy bonus adds lambda R(pi) p dt on the surviving step only.
  const auto with = randomized_reward(paths, PayoffKind::Put, 44.0, 0.06, pi, 0.5, true);
  const double r_pi = 4.0 - 4.0 * std::log(4.0);
  CHECK(with.mean == doctest::Approx(4.0 + 0.5 * r_pi * 0.25).epsilon(1e-12));
}

TEST_CASE("reward on raw value rows matches hand arithmetic") {
  Eigen::MatrixXd g(1, 2), pi(1, 1);
  g << 2.0, 3.0;
  pi << 0.5;
  // r = 0, dt = 0.1: 2 * 0.5 * 0.1 + 3 * (1 - 0.05) = 2.95.
  const auto flat = randomized_reward_values(g, 0.0, 0.1, pi, 0.0, false);
  CHECK(flat.mean == doctest::Approx(2.95).epsilon(1e-14));
  // With discounting the horizon term picks up e^{-r T}.
  const auto disc = randomized_reward_values(g, 0.05, 0.1, pi, 0.0, false);
  CHECK(disc.mean ==
        doctest::Approx(2.0 * 0.5 * 0.1 + std::exp(-0.05 * 0.1) * 3.0 * 0.95).epsilon(1e-14));
}

TEST_CASE("threshold rule stops at the horizon under an unreachable value") {
  const auto paths = batch_1d({36.0, 50.0, 30.0}, 1.0);
  const auto never = threshold_stop_reward(paths, PayoffKind::Put, 40.0, 0.06,
                                           [](const PathBatch&, std::size_t, std::size_t) {
                                             return 1e9;
                                           });
  CHECK(never.mean == doctest::Approx(std::exp(-0.06) * 10.0).epsilon(1e-14));

  // A zero value estimate stops at once (ties stop), paying g(S_0).
  const auto now = threshold_stop_reward(paths, PayoffKind::Put, 40.0, 0.06,
                                         [](const PathBatch&, std::size_t, std::size_t) {
                                           return 0.0;
                                         });
  CHECK(now.mean == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("threshold rule stops at the first crossing") {
  // Payoffs along the path: 4, 0, 10; value estimate 3: stop at l = 0.
  const auto paths = batch_1d({36.0, 50.0, 30.0}, 1.0);
  const auto est = threshold_stop_reward(paths, PayoffKind::Put, 40.0, 0.06,
                                         [](const PathBatch&, std::size_t, std::size_t l) {
                                           return l == 0 ? 5.0 : 3.0;
                                         });
  // l = 0: 4 < 5 continue; l = 1: 0 < 3 continue; l = 2 horizon: pay 10.
  CHECK(est.mean == doctest::Approx(std::exp(-0.06) * 10.0).epsilon(1e-14));
}

TEST_CASE("exponential clock with zero intensity never rings") {
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(64, 5);
  const auto sample = sample_cox_times(pi, 0.2, 11);
  REQUIRE(sample.index.size() == 64);
  for (std::size_t m = 0; m < 64; ++m) {
    CHECK(sample.index[m] == 5);
    CHECK(sample.at_horizon[m] == 1);
    CHECK(sample.theta[m] > 0.0);
  }
}

TEST_CASE("exponential clock matches the Exp(1) crossing probability") {
  // One unit of cumulated intensity after the first step: the clock rings
  // there with probability 1 - e^{-1}; it can never ring at time zero.
  const std::size_t n = 100000;
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(n, 3);
  pi.col(0).setConstant(50.0);  // pi dt = 1
  const auto sample = sample_cox_times(pi, 0.02, 29);
  std::size_t rings = 0;
  for (std::size_t m = 0; m < n; ++m) {
    CHECK(sample.index[m] >= 1);
    if (sample.index[m] == 1) ++rings;
    if (sample.index[m] != 1) CHECK(sample.at_horizon[m] == 1);
  }
  const double frac = static_cast<double>(rings) / static_cast<double>(n);
  CHECK(std::fabs(frac - 0.6321205588285577) < 0.006);  // four binomial SEs
}

TEST_CASE("clock realizations match their exact conditional expectation") {
  // Conditional on a path, the exponential clock stops at t_l with
  // probability e^{-C_{l-1}} - e^{-C_l} (C_l the intensity cumulated over
  // steps k < l) and pays the horizon payoff with probability e^{-C_{L-1}}.
  // Averaging that closed form over the same paths removes all path noise,
  // so the realized mean may differ only by clock noise.
  const auto cfg = gbm_market(40.0, 40.0);
  const std::size_t n = 50000, L = 10;
  const double dt = 0.1, rate = 0.06, pi_const = 0.8;
  const auto paths = simulate_gbm(cfg, TimeGrid{1.0, L}, n, 17);
  Eigen::MatrixXd pi(n, L);
  pi.setConstant(pi_const);

  double exact = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    double row = 0.0;
    for (std::size_t l = 1; l < L; ++l) {
      const double g = payoff_on_path(paths, PayoffKind::Put, 40.0, m, l);
      const double p_stop = std::exp(-pi_const * dt * static_cast<double>(l - 1)) -
                            std::exp(-pi_const * dt * static_cast<double>(l));
      row += std::exp(-rate * dt * static_cast<double>(l)) * g * p_stop;
    }
    const double g_T = payoff_on_path(paths, PayoffKind::Put, 40.0, m, L);
    row += std::exp(-rate) * g_T * std::exp(-pi_const * dt * static_cast<double>(L - 1));
    exact += row;
  }
  exact /= static_cast<double>(n);

  const auto clock = cox_reward(paths, PayoffKind::Put, 40.0, 0.06, pi, 0.0, false, 23);
  CHECK(std::fabs(clock.mean - exact) < 4.0 * clock.std_error);
  CHECK(clock.n_paths == n);

  // The product-form functional is a different discretization of the same
  // rule (per-step mass pi dt against 1 - e^{-pi dt}), so at pi dt = 0.08
  // the two only agree to within a several-percent mismatch. This coarse
  // band still catches sign, discounting, or payoff mix-ups.
  const auto smooth = randomized_reward(paths, PayoffKind::Put, 40.0, 0.06, pi, 0.0, false);
  CHECK(std::fabs(smooth.mean - clock.mean) < 0.15 * smooth.mean);
}

TEST_CASE("entropy bonus increases the reward for moderate intensities") {
  // R(pi) = pi - pi log pi > 0 for 0 < pi < e, so the regularized functional
  // dominates the bare one at pi = 1.
  const auto cfg = gbm_market(40.0, 40.0);
  const auto paths = simulate_gbm(cfg, TimeGrid{1.0, 8}, 2000, 5);
  Eigen::MatrixXd pi = Eigen::MatrixXd::Ones(2000, 8);
  const auto off = randomized_reward(paths, PayoffKind::Put, 40.0, 0.06, pi, 0.05, false);
  const auto on = randomized_reward(paths, PayoffKind::Put, 40.0, 0.06, pi, 0.05, true);
  CHECK(on.mean > off.mean + 0.01);
}

TEST_CASE("comparison report fills the gap columns against the reference") {
  RewardEstimate est;
  est.mean = 5.296;
  est.std_error = 0.01;
  est.n_paths = 4096;
  auto row = make_report("randomized", true, 1e-4, est);
  CHECK(row.mode == "randomized");
  CHECK(row.include_entropy);
  CHECK(std::isnan(row.abs_gap));
  CHECK(std::isnan(row.rel_gap));

  const auto rows = comparison_report({row}, 5.311);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].abs_gap == doctest::Approx(0.015).epsilon(1e-10));
  CHECK(rows[0].rel_gap == doctest::Approx(0.002824326868762885).epsilon(1e-10));
}

TEST_CASE("report CSV carries the documented header and one row per mode") {
  RewardEstimate est;
  est.mean = 1.25;
  est.std_error = 0.05;
  est.n_paths = 16;
  const std::vector<EvalReport> rows = {make_report("randomized", false, 0.01, est),
                                        make_report("cox", false, 0.01, est)};
  const auto file = std::filesystem::temp_directory_path() / "softstop_report_test.csv";
  write_report_csv(rows, file);
  std::ifstream in(file);
  std::string header, line1, line2;
  std::getline(in, header);
  CHECK(header == "mode,lambda,estimate,se,abs_gap,rel_gap");
  std::getline(in, line1);
  std::getline(in, line2);
  CHECK(line1.substr(0, 11) == "randomized,");
  CHECK(line2.substr(0, 4) == "cox,");
  in.close();
  std::filesystem::remove(file);
}

TEST_CASE("grid-backed value provider interpolates in space and snaps in time") {
  SpaceTimeGrid grid = build_grid(1.0, 1.0, 4, 2, 0.4);  // x = -0.4..0.4, rows t = 0,.25,...
  ValueField field;
  field.grid = grid;
  field.payoff.assign(grid.columns(), 0.0);
  field.u.assign(grid.rows() * grid.columns(), 0.0);
  // Row 0 is linear in the column index; later rows are constant markers.
  for (std::size_t j = 0; j < grid.columns(); ++j) field.at(0, j) = static_cast<double>(j);
  for (std::size_t i = 1; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.columns(); ++j) field.at(i, j) = 10.0 * static_cast<double>(i);

  const auto value = pde_value_provider(field);

  // Path times t = 0, 0.5, 1.0 snap to field rows 0, 2, 4.
  const auto paths = batch_1d({std::exp(-0.1), 1.0, 1.0}, 1.0);
  // x = -0.1 sits halfway between column 1 (-0.2) and column 2 (0).
  CHECK(value(paths, 0, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(value(paths, 0, 1) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(value(paths, 0, 2) == doctest::Approx(40.0).epsilon(1e-12));

  // Levels beyond the lattice clamp to the edge columns.
  const auto wild = batch_1d({std::exp(5.0), std::exp(-9.0), 1.0}, 1.0);
  CHECK(value(wild, 0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(value(wild, 0, 1) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("network-backed policies start neutral and respond to the head bias") {
  const auto cfg = gbm_market(40.0, 40.0);
  const TimeGrid grid{1.0, 4};
  const auto paths = simulate_gbm(cfg, grid, 32, 9);
  const auto layouts = default_layouts(cfg, grid);

  // Zero network: V = g everywhere, so pi = exp(0) = 1 on every entry.
  auto net = init_valuenet(layouts, 0.01, 1.0, 1, /*zero_init=*/true);
  const auto neutral = net_policy_matrix(net, paths, PayoffKind::Put, 40.0);
  REQUIRE(neutral.rows() == 32);
  REQUIRE(neutral.cols() == 4);
  CHECK(neutral.minCoeff() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(neutral.maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));

  // Lowering the head by lambda turns every intensity into e.
  for (auto& s : net.steps) s.b3 = -0.01;
  const auto eager = net_policy_matrix(net, paths, PayoffKind::Put, 40.0);
  CHECK(eager.minCoeff() == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(eager.maxCoeff() == doctest::Approx(std::exp(1.0)).epsilon(1e-12));

  // A big head drop saturates at the cap 1/dt.
  for (auto& s : net.steps) s.b3 = -10.0;
  const auto capped = net_policy_matrix(net, paths, PayoffKind::Put, 40.0);
  CHECK(capped.minCoeff() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(capped.maxCoeff() == doctest::Approx(4.0).epsilon(1e-12));

  // The net-backed value provider reports the biased values themselves.
  const auto value = net_value_provider(net, PayoffKind::Put, 40.0);
  const double g00 = payoff_on_path(paths, PayoffKind::Put, 40.0, 0, 0);
  CHECK(value(paths, 0, 0) == doctest::Approx(g00 - 10.0).epsilon(1e-12));
}
