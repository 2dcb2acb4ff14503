#include "softstop/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "softstop/errors.hpp"
#include "softstop/policy_math.hpp"
#include "softstop/rng.hpp"

namespace softstop {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'T', 'O', 'P', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

/// Fill a weight matrix with He-normal draws, advancing the shared counter.
void fill_he(Eigen::Ref<Eigen::MatrixXd> w, std::size_t fan_in, const CounterRng& rng,
             std::uint64_t& counter) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = stddev * rng.normal(counter++);
}

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void write_doubles(std::ofstream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

template <typename T>
void read_pod(std::ifstream& in, T& value, const std::string& what) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("checkpoint truncated while reading " + what);
}

void read_doubles(std::ifstream& in, double* data, std::size_t count, const std::string& what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw IoError("checkpoint truncated while reading " + what);
}

}  // namespace

ValueNet init_valuenet(const std::vector<NetLayout>& layouts, double lambda, double discount,
                       std::uint64_t seed, bool zero_init) {
  if (lambda <= 0.0) throw ConfigError("net: temperature must be positive");
  ValueNet net;
  net.lambda = lambda;
  net.discount = discount;
  net.seed = seed;
  net.steps.reserve(layouts.size());
  const std::uint64_t net_seed = CounterRng::derive(seed, 0x6e6574ull);
  for (std::size_t l = 0; l < layouts.size(); ++l) {
    const NetLayout& lay = layouts[l];
    if (lay.hidden1 == 0 || lay.hidden2 == 0)
      throw ConfigError("net: hidden widths must be positive");
    StepNet s;
    s.layout = lay;
    s.w1.setZero(static_cast<Eigen::Index>(lay.hidden1), static_cast<Eigen::Index>(lay.input_dim));
    s.b1.setZero(static_cast<Eigen::Index>(lay.hidden1));
    s.w2.setZero(static_cast<Eigen::Index>(lay.hidden2), static_cast<Eigen::Index>(lay.hidden1));
    s.b2.setZero(static_cast<Eigen::Index>(lay.hidden2));
    s.w3.setZero(static_cast<Eigen::Index>(lay.hidden2));
    s.b3 = 0.0;
    if (!zero_init) {
      CounterRng rng(net_seed, l);
      std::uint64_t counter = 0;
      fill_he(s.w1, lay.input_dim, rng, counter);
      fill_he(s.w2, lay.hidden1, rng, counter);
      // The linear head starts at zero so the initial value estimate is the
      // payoff baseline itself (intensity 1 everywhere): a neutral start
      // instead of a saturated random policy, which matters for small
      // temperatures where exp(-(V-g)/lambda) saturates for |V-g| >> lambda.
    }
    net.steps.push_back(std::move(s));
  }
  return net;
}

std::vector<NetLayout> default_layouts(const MarketConfig& market, const TimeGrid& grid,
                                       std::size_t hidden_width) {
  std::vector<NetLayout> layouts(grid.steps);
  for (std::size_t l = 0; l < grid.steps; ++l) {
    NetLayout& lay = layouts[l];
    switch (market.kind) {
      case MarketKind::Gbm1d:
        lay.input_dim = 2;
        lay.hidden1 = lay.hidden2 = 21;
        break;
      case MarketKind::BsMultiD:
        lay.input_dim = market.dim() + 1;
        lay.hidden1 = lay.hidden2 = market.dim() + 20;
        break;
      case MarketKind::Fbm:
        lay.input_dim = l;
        lay.hidden1 = lay.hidden2 = l + 20;
        break;
    }
    if (hidden_width > 0) lay.hidden1 = lay.hidden2 = hidden_width;
  }
  return layouts;
}

Eigen::VectorXd value_batch(const StepNet& net, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& payoff, ForwardCache* cache) {
  if (x.cols() != static_cast<Eigen::Index>(net.layout.input_dim))
    throw ConfigError("net: feature dimension " + std::to_string(x.cols()) +
                      " does not match network input dimension " +
                      std::to_string(net.layout.input_dim));
  if (net.layout.residual_payoff && payoff.size() != x.rows())
    throw ConfigError("net: payoff length does not match batch size");
  Eigen::MatrixXd a1 =
      ((x * net.w1.transpose()).rowwise() + net.b1.transpose()).cwiseMax(0.0);
  Eigen::MatrixXd a2 =
      ((a1 * net.w2.transpose()).rowwise() + net.b2.transpose()).cwiseMax(0.0);
  Eigen::VectorXd out = (a2 * net.w3).array() + net.b3;
  if (net.layout.residual_payoff) out += payoff;
  if (cache != nullptr) {
    cache->a1 = std::move(a1);
    cache->a2 = std::move(a2);
  }
  return out;
}

Eigen::VectorXd value_at(const ValueNet& net, std::size_t l, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& payoff) {
  if (l > net.steps.size()) throw ConfigError("net: time index past the terminal step");
  if (l == net.steps.size()) return payoff;
  return value_batch(net.steps[l], x, payoff);
}

Eigen::MatrixXd feature_matrix(const PathBatch& paths, PayoffKind payoff, double strike,
                               std::size_t l, Eigen::VectorXd* payoff_out) {
  if (l > paths.grid.steps) throw ConfigError("features: time index past the horizon");
  const std::size_t n = paths.n_paths;
  const std::size_t d = paths.dim;
  Eigen::MatrixXd x;
  switch (payoff) {
    case PayoffKind::Put: {
      if (d != 1) throw ConfigError("features: put payoff needs one coordinate");
      x.resize(static_cast<Eigen::Index>(n), 2);
      for (std::size_t m = 0; m < n; ++m) {
        const double s = paths.at(m, l, 0);
        x(static_cast<Eigen::Index>(m), 0) = s;
        x(static_cast<Eigen::Index>(m), 1) = std::max(strike - s, 0.0);
      }
      break;
    }
    case PayoffKind::MaxCall: {
      x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
      for (std::size_t m = 0; m < n; ++m) {
        double best = paths.at(m, l, 0);
        for (std::size_t i = 0; i < d; ++i) {
          const double s = paths.at(m, l, i);
          x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)) = s;
          best = std::max(best, s);
        }
        x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d)) = std::max(best - strike, 0.0);
      }
      break;
    }
    case PayoffKind::Identity: {
      if (d != 1) throw ConfigError("features: identity payoff needs one coordinate");
      const std::size_t width = std::min(l, paths.grid.steps);
      x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
      for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 1; k <= width; ++k)
          x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k - 1)) = paths.at(m, k, 0);
      break;
    }
  }
  if (payoff_out != nullptr) {
    payoff_out->resize(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m)
      (*payoff_out)(static_cast<Eigen::Index>(m)) = payoff_on_path(paths, payoff, strike, m, l);
  }
  return x;
}

Eigen::ArrayXd policy_from_value(const Eigen::ArrayXd& value, const Eigen::ArrayXd& payoff,
                                 double lambda, double pi_cap, double exp_clamp) {
  if (value.size() != payoff.size())
    throw ConfigError("policy: value and payoff lengths differ");
  Eigen::ArrayXd pi(value.size());
  for (Eigen::Index m = 0; m < value.size(); ++m)
    pi(m) = stop_intensity(value(m), payoff(m), lambda, pi_cap, exp_clamp);
  return pi;
}

void save_checkpoint(const ValueNet& net, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(net.steps.size()));
    write_pod(out, net.lambda);
    write_pod(out, net.discount);
    write_pod(out, net.seed);
    for (const StepNet& s : net.steps) {
      write_pod(out, static_cast<std::uint64_t>(s.layout.input_dim));
      write_pod(out, static_cast<std::uint64_t>(s.layout.hidden1));
      write_pod(out, static_cast<std::uint64_t>(s.layout.hidden2));
      write_pod(out, static_cast<std::uint8_t>(s.layout.residual_payoff ? 1 : 0));
      write_doubles(out, s.w1.data(), static_cast<std::size_t>(s.w1.size()));
      write_doubles(out, s.b1.data(), static_cast<std::size_t>(s.b1.size()));
      write_doubles(out, s.w2.data(), static_cast<std::size_t>(s.w2.size()));
      write_doubles(out, s.b2.data(), static_cast<std::size_t>(s.b2.size()));
      write_doubles(out, s.w3.data(), static_cast<std::size_t>(s.w3.size()));
      write_pod(out, s.b3);
    }
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

ValueNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a value-net checkpoint: " + path.string());
  std::uint32_t version = 0;
  read_pod(in, version, "version");
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t n_steps = 0;
  ValueNet net;
  read_pod(in, n_steps, "step count");
  read_pod(in, net.lambda, "temperature");
  read_pod(in, net.discount, "discount");
  read_pod(in, net.seed, "seed");
  if (n_steps > (1u << 20)) throw IoError("implausible step count in checkpoint");
  net.steps.resize(n_steps);
  for (std::uint64_t l = 0; l < n_steps; ++l) {
    StepNet& s = net.steps[l];
    const std::string where = "step " + std::to_string(l);
    std::uint64_t in_dim = 0, h1 = 0, h2 = 0;
    std::uint8_t residual = 0;
    read_pod(in, in_dim, where);
    read_pod(in, h1, where);
    read_pod(in, h2, where);
    read_pod(in, residual, where);
    if (h1 == 0 || h2 == 0 || h1 > (1u << 20) || h2 > (1u << 20) || in_dim > (1u << 20))
      throw IoError("implausible layer sizes in checkpoint at " + where);
    s.layout = NetLayout{static_cast<std::size_t>(in_dim), static_cast<std::size_t>(h1),
                         static_cast<std::size_t>(h2), residual != 0};
    s.w1.resize(static_cast<Eigen::Index>(h1), static_cast<Eigen::Index>(in_dim));
    s.b1.resize(static_cast<Eigen::Index>(h1));
    s.w2.resize(static_cast<Eigen::Index>(h2), static_cast<Eigen::Index>(h1));
    s.b2.resize(static_cast<Eigen::Index>(h2));
    s.w3.resize(static_cast<Eigen::Index>(h2));
    read_doubles(in, s.w1.data(), static_cast<std::size_t>(s.w1.size()), where);
    read_doubles(in, s.b1.data(), static_cast<std::size_t>(s.b1.size()), where);
    read_doubles(in, s.w2.data(), static_cast<std::size_t>(s.w2.size()), where);
    read_doubles(in, s.b2.data(), static_cast<std::size_t>(s.b2.size()), where);
    read_doubles(in, s.w3.data(), static_cast<std::size_t>(s.w3.size()), where);
    read_pod(in, s.b3, where);
  }
  return net;
}

}  // namespace softstop
