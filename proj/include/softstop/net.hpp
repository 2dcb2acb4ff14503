#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "softstop/market.hpp"

namespace softstop {

/// Shape of one per-timestep value network: two rectifier hidden layers and a
/// scalar output head.  When residual_payoff is set the network output is
/// added to the immediate payoff, so a zero network represents V = g exactly.
struct NetLayout {
  std::size_t input_dim = 2;
  std::size_t hidden1 = 21;
  std::size_t hidden2 = 21;
  bool residual_payoff = true;

  std::size_t params() const {
    return hidden1 * (input_dim + 1) + hidden2 * (hidden1 + 1) + (hidden2 + 1);
  }
};

/// Parameters of one per-timestep network.  Weight matrices are stored with
/// one row per output unit, so a forward pass is x * w'.
struct StepNet {
  NetLayout layout;
  Eigen::MatrixXd w1;  // hidden1 x input_dim
  Eigen::VectorXd b1;  // hidden1
  Eigen::MatrixXd w2;  // hidden2 x hidden1
  Eigen::VectorXd b2;  // hidden2
  Eigen::VectorXd w3;  // hidden2
  double b3 = 0.0;
};

/// One independent network per decision time l = 0..L-1; the value at l = L is
/// the terminal payoff itself.
struct ValueNet {
  std::vector<StepNet> steps;
  double lambda = 1e-4;
  double discount = 1.0;  // per-step discount factor e^{-r dt}
  std::uint64_t seed = 0;
};

/// He-normal initialization (std sqrt(2/fan_in), zero biases), drawn from
/// counter-based streams so the result is reproducible bit for bit.  With
/// zero_init all weights and biases start at zero (V = g everywhere).
ValueNet init_valuenet(const std::vector<NetLayout>& layouts, double lambda, double discount,
                       std::uint64_t seed, bool zero_init = false);

/// Layout rule used by the command-line driver: put -> input (S, g) with
/// hidden width 21; max-call -> input (S_1..S_d, g) with hidden width d + 20;
/// fractional Brownian motion -> at time t_l the input is the l observed
/// increments' levels (W_{t_1},..,W_{t_l}) with hidden width l + 20 (the l = 0
/// network has no inputs and reduces to a trainable constant).  A nonzero
/// hidden_width overrides the width of both hidden layers.
std::vector<NetLayout> default_layouts(const MarketConfig& market, const TimeGrid& grid,
                                       std::size_t hidden_width = 0);

/// Hidden activations kept by a forward pass for use in backpropagation.
struct ForwardCache {
  Eigen::MatrixXd a1;  // n x hidden1, rectified
  Eigen::MatrixXd a2;  // n x hidden2, rectified
};

/// Batch forward pass: x holds one feature row per sample, payoff the
/// immediate payoff per sample.  Returns the value estimate per sample.
Eigen::VectorXd value_batch(const StepNet& net, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& payoff, ForwardCache* cache = nullptr);

/// Value at decision time l; l == steps.size() returns the payoff unchanged
/// (terminal condition), in which case x is ignored.
Eigen::VectorXd value_at(const ValueNet& net, std::size_t l, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& payoff);

/// Feature rows for decision time l (see default_layouts for the per-model
/// feature definition).  Also fills the immediate payoff per path when
/// payoff_out is given.  l may equal grid.steps (terminal payoff; features of
/// the last decision time are returned for the path-dependent model).
Eigen::MatrixXd feature_matrix(const PathBatch& paths, PayoffKind payoff, double strike,
                               std::size_t l, Eigen::VectorXd* payoff_out = nullptr);

/// Soft stopping intensities from value estimates, elementwise.
Eigen::ArrayXd policy_from_value(const Eigen::ArrayXd& value, const Eigen::ArrayXd& payoff,
                                 double lambda, double pi_cap, double exp_clamp);

/// Binary checkpoint of a ValueNet; the round trip is exact (raw IEEE doubles).
void save_checkpoint(const ValueNet& net, const std::filesystem::path& path);
ValueNet load_checkpoint(const std::filesystem::path& path);

}  // namespace softstop
