#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "softstop/evaluate.hpp"
#include "softstop/market.hpp"
#include "softstop/net.hpp"

namespace softstop {

enum class OptimizerKind { Adam, Sgd };
const char* to_string(OptimizerKind kind);

struct TrainConfig {
  std::size_t iterations = 3000;
  std::size_t batch_size = 1024;
  double learning_rate = 3e-3;
  double lambda = 1e-4;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double grad_clip = 10.0;     // global-norm clip per timestep block; <= 0 disables
  std::size_t eval_every = 100;
  std::size_t test_paths = 1u << 16;
  // Treat the intensity as a constant in the gradient (the policy-improvement
  // map is applied before the regression step).  The differentiate-through-pi
  // variant is available by clearing this, but for small temperatures its
  // gradient is dominated by the intensity channel, which rewards saturating
  // the policy to kill target variance instead of fitting the value; see the
  // matching flag in the run configuration.
  bool stopgrad_policy = true;
  double exp_clamp = 60.0;
  std::optional<double> reference;  // known price, for relative errors in the curve
  bool deterministic = true;        // serial updates; kept for config symmetry
};

/// Ingredients of the one-step temporal-difference loss at a fixed timestep.
struct TdOptions {
  double lambda = 1e-4;
  double dt = 0.02;
  double discount = 1.0;  // e^{-r dt}
  double pi_cap = 50.0;   // usually 1/dt
  double exp_clamp = 60.0;
  bool stopgrad_policy = true;
  const Eigen::ArrayXd* pi_override = nullptr;  // test hook: use these intensities verbatim
};

/// Gradient of the loss with respect to one timestep's parameters.
struct StepGrads {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  Eigen::VectorXd w3;
  double b3 = 0.0;
};

/// Mean squared one-step residual
///   delta = g pi dt + lambda R(pi) dt + discount V_next (1 - pi dt) - V,
/// with pi = min(exp(clamped -(V-g)/lambda), pi_cap) computed from the current
/// value estimates (the gradient flows through pi only when stopgrad_policy
/// is cleared).
/// Fills grads when given; throws TrainingError on non-finite residuals.
double td_loss(const StepNet& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& payoff,
               const Eigen::VectorXd& v_next, const TdOptions& opt, StepGrads* grads = nullptr);

/// First- and second-moment accumulators for Adam, one slot per tensor.
struct AdamState {
  StepGrads m;
  StepGrads v;
};

AdamState make_adam_state(const NetLayout& layout);

/// Applies one optimizer step in place.  step_count is the 1-based update
/// counter used for Adam bias correction; grads are clipped to global norm
/// grad_clip first (when positive).
void apply_update(StepNet& net, StepGrads grads, AdamState& state, OptimizerKind kind, double lr,
                  double grad_clip, std::size_t step_count);

struct LearningCurve {
  struct Point {
    std::size_t iteration = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    double rel_error = std::numeric_limits<double>::quiet_NaN();
    double loss = 0.0;
  };
  std::vector<Point> points;
};

/// CSV columns: iteration, estimate, relative_error, se, loss.
void write_curve_csv(const LearningCurve& curve, const std::filesystem::path& path);

struct TrainProgress {
  std::size_t iteration = 0;
  std::size_t total = 0;
  double loss = 0.0;
  double estimate = 0.0;
};
using ProgressFn = std::function<void(const TrainProgress&)>;

struct TrainResult {
  ValueNet net;
  LearningCurve curve;
  RewardEstimate final_estimate;  // randomized reward on the held-out test set
};

/// Backward-sweep temporal-difference training: each iteration draws a fresh
/// batch of paths, then updates the timestep networks from the horizon down,
/// with each target V_{l+1} recomputed from the just-updated parameters.
/// Every eval_every iterations the policy is scored on a fixed test set.
TrainResult train(const MarketConfig& market, const TimeGrid& grid, const TrainConfig& cfg,
                  const std::vector<NetLayout>& layouts, const ProgressFn& progress = {});

/// Randomized-reward estimate of a trained net's policy on the given paths.
RewardEstimate net_policy_estimate(const ValueNet& net, const PathBatch& paths,
                                   const MarketConfig& market, bool include_entropy = false,
                                   double exp_clamp = 60.0);

}  // namespace softstop
