#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "softstop/grid.hpp"
#include "softstop/market.hpp"
#include "softstop/net.hpp"

namespace softstop {

/// Per-path survival probabilities p_l under a randomized stopping rule:
/// p_0 = 1 and p_{l+1} = (1 - pi_l dt) p_l.
struct SurvivalWeights {
  std::size_t n_paths = 0;
  std::size_t steps = 0;
  std::vector<double> p;  // n_paths x (steps + 1), row-major

  double at(std::size_t m, std::size_t l) const { return p[m * (steps + 1) + l]; }
  double& at(std::size_t m, std::size_t l) { return p[m * (steps + 1) + l]; }
};

/// pi holds one intensity per (path, decision time); every pi dt must lie in
/// [0, 1] or the discrete survival weights leave [0, 1] (contract violation).
SurvivalWeights survival_weights(const Eigen::MatrixXd& pi, double dt);

struct RewardEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// Discounted reward of a randomized stopping rule, averaged over paths:
///   sum_l e^{-r t_l} (g_l pi_l + [include_entropy] lambda R(pi_l)) p_l dt
///     + e^{-r T} g_L p_L.
RewardEstimate randomized_reward(const PathBatch& paths, PayoffKind payoff, double strike,
                                 double rate, const Eigen::MatrixXd& pi, double lambda,
                                 bool include_entropy);

/// Same functional on caller-supplied payoff values g (n_paths x (steps+1)).
RewardEstimate randomized_reward_values(const Eigen::MatrixXd& g, double rate, double dt,
                                        const Eigen::MatrixXd& pi, double lambda,
                                        bool include_entropy);

/// Callback giving a value estimate for path m at decision time l.
using PathValue = std::function<double(const PathBatch& paths, std::size_t m, std::size_t l)>;

/// Classical stopping rule "stop as soon as the payoff reaches the value
/// estimate" (ties stop; the horizon always stops), averaged over paths.
RewardEstimate threshold_stop_reward(const PathBatch& paths, PayoffKind payoff, double strike,
                                     double rate, const PathValue& value);

/// Exponential-clock stopping times for a randomized rule: path m stops at the
/// first grid time t_l with sum_{k<l} pi_k dt >= Theta_m, Theta_m ~ Exp(1),
/// and at the horizon if the threshold is never reached.
struct CoxSample {
  std::vector<double> theta;
  std::vector<std::size_t> index;  // grid index of the stopping time
  std::vector<std::uint8_t> at_horizon;  // 1 when the clock never rang
};

CoxSample sample_cox_times(const Eigen::MatrixXd& pi, double dt, std::uint64_t seed);

/// Discounted reward of the exponential-clock realization of a randomized
/// rule; entropy (when requested) is accumulated over the steps survived.
RewardEstimate cox_reward(const PathBatch& paths, PayoffKind payoff, double strike, double rate,
                          const Eigen::MatrixXd& pi, double lambda, bool include_entropy,
                          std::uint64_t seed);

/// One evaluation row: how an estimate compares against a reference price.
struct EvalReport {
  std::string mode;  // randomized | threshold | cox
  bool include_entropy = false;
  double lambda = 0.0;
  std::size_t n_paths = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double abs_gap = std::numeric_limits<double>::quiet_NaN();
  double rel_gap = std::numeric_limits<double>::quiet_NaN();
};

EvalReport make_report(std::string mode, bool include_entropy, double lambda,
                       const RewardEstimate& est);

/// Fills the gap columns of every row against the reference value.
std::vector<EvalReport> comparison_report(std::vector<EvalReport> rows, double reference);

/// Aligned text table of the rows (reference row appended when given).
std::string report_table(const std::vector<EvalReport>& rows,
                         std::optional<double> reference = std::nullopt);

/// CSV columns: mode, lambda, estimate, se, abs_gap, rel_gap.
void write_report_csv(const std::vector<EvalReport>& rows, const std::filesystem::path& path);

/// Debug dump of an exponential-clock sample: path, theta, stop_index, at_horizon.
void write_cox_csv(const CoxSample& sample, const std::filesystem::path& path);

/// Value provider backed by a solved value surface (linear interpolation in
/// log-price, nearest time row); for threshold stopping against a grid price.
PathValue pde_value_provider(const ValueField& field);

/// Value provider backed by per-timestep networks (one forward per lookup).
PathValue net_value_provider(const ValueNet& net, PayoffKind payoff, double strike);

/// Per-path per-time intensity matrix induced by a trained value net:
/// pi = min(exp(-(V - g)/lambda), 1/dt), clamped exponent.
Eigen::MatrixXd net_policy_matrix(const ValueNet& net, const PathBatch& paths, PayoffKind payoff,
                                  double strike, double exp_clamp = 60.0);

}  // namespace softstop
