// Path simulators checked against closed-form moments, hand-computed
// factorizations, and frozen covariance entries.
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "softstop/errors.hpp"
#include "softstop/simulate.hpp"

using namespace softstop;

namespace {

MarketConfig gbm_market() {
  MarketConfig cfg;
  cfg.kind = MarketKind::Gbm1d;
  cfg.payoff = PayoffKind::Put;
  cfg.rate = 0.06;
  cfg.strike = 40.0;
  cfg.horizon = 1.0;
  cfg.spot = {40.0};
  cfg.dividend = {0.0};
  cfg.sigma = {0.2};
  return cfg;
}

MarketConfig fbm_market(double hurst) {
  MarketConfig cfg;
  cfg.kind = MarketKind::Fbm;
  cfg.payoff = PayoffKind::Identity;
  cfg.rate = 0.0;
  cfg.strike = 0.0;
  cfg.horizon = 1.0;
  cfg.hurst = hurst;
  cfg.spot = {0.0};
  cfg.dividend = {0.0};
  cfg.sigma = {1.0};
  return cfg;
}

}  // namespace

TEST_CASE("cholesky_lower reproduces a hand factorization") {
  // [[4,2],[2,5]] = L L^T with L = [[2,0],[1,2]].
  const auto l = cholesky_lower({4.0, 2.0, 2.0, 5.0}, 2);
  REQUIRE(l.size() == 4);
  CHECK(l[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(l[1] == doctest::Approx(0.0));
  CHECK(l[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(l[3] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("cholesky_lower flattens semidefinite pivots instead of failing") {
  // Rank one: [[1,1],[1,1]] = L L^T with L = [[1,0],[1,0]].
  const auto l = cholesky_lower({1.0, 1.0, 1.0, 1.0}, 2);
  CHECK(l[0] == doctest::Approx(1.0));
  CHECK(l[2] == doctest::Approx(1.0));
  CHECK(l[3] == doctest::Approx(0.0));
}

TEST_CASE("cholesky_lower reports the offending minor of an indefinite matrix") {
  try {
    cholesky_lower({1.0, 2.0, 2.0, 1.0}, 2);
    FAIL("expected FactorizationError");
  } catch (const FactorizationError& e) {
    CHECK(e.order == 2);
  }
}

TEST_CASE("fbm covariance matches frozen entries at H = 0.2") {
  // Grid t = (1, 2): C11 = 1, C22 = 2^{0.4}, C12 = (1 + 2^{0.4} - 1)/2.
  const auto c = fbm_covariance(0.2, TimeGrid{2.0, 2});
  REQUIRE(c.size() == 4);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(0.6597539553864471).epsilon(1e-14));
  CHECK(c[2] == doctest::Approx(0.6597539553864471).epsilon(1e-14));
  CHECK(c[3] == doctest::Approx(1.3195079107728942).epsilon(1e-14));
}

TEST_CASE("fbm covariance degenerates to min(s,t) at H = 0.5 and s*t at H = 1") {
  const TimeGrid grid{1.0, 4};
  const auto half = fbm_covariance(0.5, grid);
  const auto one = fbm_covariance(1.0, grid);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      const double ta = grid.t(a + 1), tb = grid.t(b + 1);
      CHECK(half[a * 4 + b] == doctest::Approx(std::min(ta, tb)).epsilon(1e-13));
      CHECK(one[a * 4 + b] == doctest::Approx(ta * tb).epsilon(1e-13));
    }
  }
}

TEST_CASE("gbm terminal mean matches the lognormal moment") {
  // E[S_T] = S_0 e^{rT}; exact stepping makes one step sufficient.
  const auto paths = simulate_gbm(gbm_market(), TimeGrid{1.0, 1}, 200000, 42);
  double mean = 0.0;
  for (std::size_t m = 0; m < paths.n_paths; ++m) mean += paths.at(m, 1);
  mean /= static_cast<double>(paths.n_paths);
  // Population SE at this size is about 0.019; three of those.
  CHECK(std::fabs(mean - 42.473461861814386) < 0.06);
}

TEST_CASE("gbm paths start at spot and are positive") {
  const auto paths = simulate_gbm(gbm_market(), TimeGrid{1.0, 8}, 500, 7);
  for (std::size_t m = 0; m < paths.n_paths; ++m) {
    CHECK(paths.at(m, 0) == 40.0);
    for (std::size_t l = 0; l <= 8; ++l) CHECK(paths.at(m, l) > 0.0);
  }
}

TEST_CASE("simulation is deterministic in the seed") {
  const auto a = simulate_gbm(gbm_market(), TimeGrid{1.0, 4}, 64, 123);
  const auto b = simulate_gbm(gbm_market(), TimeGrid{1.0, 4}, 64, 123);
  const auto c = simulate_gbm(gbm_market(), TimeGrid{1.0, 4}, 64, 124);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
}

TEST_CASE("perfectly correlated coordinates move in lockstep") {
  MarketConfig cfg = gbm_market();
  cfg.kind = MarketKind::BsMultiD;
  cfg.spot = {40.0, 40.0};
  cfg.dividend = {0.0, 0.0};
  cfg.sigma = {0.2, 0.2};
  cfg.correlation = {{1.0, 1.0}, {1.0, 1.0}};
  const auto paths = simulate_correlated_bs(cfg, TimeGrid{1.0, 4}, 128, 9);
  REQUIRE(paths.dim == 2);
  for (std::size_t m = 0; m < paths.n_paths; ++m)
    for (std::size_t l = 0; l <= 4; ++l)
      CHECK(paths.at(m, l, 0) == doctest::Approx(paths.at(m, l, 1)).epsilon(1e-12));
}

TEST_CASE("uncorrelated multi-dimensional coordinates match marginal moments") {
  MarketConfig cfg = gbm_market();
  cfg.kind = MarketKind::BsMultiD;
  cfg.rate = 0.05;
  cfg.spot = {90.0, 110.0};
  cfg.dividend = {0.10, 0.10};
  cfg.sigma = {0.2, 0.2};
  const auto paths = simulate_correlated_bs(cfg, TimeGrid{1.0, 1}, 200000, 11);
  double mean0 = 0.0, mean1 = 0.0;
  for (std::size_t m = 0; m < paths.n_paths; ++m) {
    mean0 += paths.at(m, 1, 0);
    mean1 += paths.at(m, 1, 1);
  }
  mean0 /= static_cast<double>(paths.n_paths);
  mean1 /= static_cast<double>(paths.n_paths);
  // E[S^i_T] = s_i e^{(r - delta_i) T}; SE about 0.04, allow four.
  CHECK(std::fabs(mean0 - 90.0 * std::exp(-0.05)) < 0.17);
  CHECK(std::fabs(mean1 - 110.0 * std::exp(-0.05)) < 0.20);
}

TEST_CASE("fbm paths are pinned at zero and match the marginal variance") {
  const auto paths = simulate_fbm(fbm_market(0.3), TimeGrid{1.0, 4}, 100000, 5);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t m = 0; m < paths.n_paths; ++m) {
    CHECK(paths.at(m, 0) == 0.0);
    const double w1 = paths.at(m, 4);
    sum += w1;
    sumsq += w1 * w1;
  }
  const double n = static_cast<double>(paths.n_paths);
  const double var = sumsq / n - (sum / n) * (sum / n);
  // Var(W_1) = 1^{2H} = 1 for every H; sampling error of the variance is
  // about sqrt(2/n) = 0.0045.
  CHECK(std::fabs(sum / n) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("fbm increments are uncorrelated at H = 0.5") {
  const auto paths = simulate_fbm(fbm_market(0.5), TimeGrid{1.0, 2}, 100000, 13);
  double cov = 0.0;
  for (std::size_t m = 0; m < paths.n_paths; ++m) {
    const double w1 = paths.at(m, 1);
    const double inc = paths.at(m, 2) - w1;
    cov += w1 * inc;
  }
  cov /= static_cast<double>(paths.n_paths);
  CHECK(std::fabs(cov) < 0.005);
}

TEST_CASE("degenerate H = 1 paths are linear in time") {
  // C(s,t) = s t is rank one, so W_t = t Z: every path is a straight line.
  const auto paths = simulate_fbm(fbm_market(1.0), TimeGrid{1.0, 4}, 256, 3);
  for (std::size_t m = 0; m < paths.n_paths; ++m) {
    const double w1 = paths.at(m, 4);
    for (std::size_t l = 0; l <= 4; ++l)
      CHECK(paths.at(m, l) == doctest::Approx(w1 * paths.grid.t(l)).epsilon(1e-9));
  }
}

TEST_CASE("simulate_paths dispatches on the market kind") {
  const auto direct = simulate_fbm(fbm_market(0.5), TimeGrid{1.0, 4}, 32, 21);
  MarketConfig cfg = fbm_market(0.5);
  const auto routed = simulate_paths(cfg, TimeGrid{1.0, 4}, 32, 21);
  CHECK(direct.values == routed.values);
  CHECK(routed.kind == MarketKind::Fbm);
}

TEST_CASE("path csv dump has the documented columns") {
  const auto paths = simulate_gbm(gbm_market(), TimeGrid{1.0, 2}, 2, 17);
  const auto file = std::filesystem::temp_directory_path() / "softstop_paths_test.csv";
  write_paths_csv(paths, file);
  std::ifstream in(file);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "path,time_index,coordinate,value");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2 * 3 * 1);  // paths * grid points * coordinates
  in.close();
  std::filesystem::remove(file);
}
