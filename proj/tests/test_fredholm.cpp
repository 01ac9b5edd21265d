#include <cmath>
#include <random>

#include "doctest.h"
#include "mcsolve/fredholm.hpp"
#include "mcsolve/gaussian_elimination.hpp"
#include "test_support.hpp"

using namespace mcsolve;

namespace {

const auto one = [](double) { return 1.0; };

// f(x) = 1 + scale * x * integral y f(y) dy has the closed form
// f(x) = 1 + scale * x * I with I solving I = 1/2 + scale * I / 3.
double separable_solution(double scale, double x) {
  const double i = 0.5 / (1.0 - scale / 3.0);
  return 1.0 + scale * x * i;
}

}  // namespace

TEST_CASE("kernel construction measures and gates the norm") {
  const Kernel1D half = constant_kernel(0.5);
  CHECK(half.norm_bound == doctest::Approx(0.5).epsilon(1e-12));

  const Kernel1D xy = separable_kernel(0.4);
  // sup_x of 0.4 x integral y dy = 0.4 * 1 * 1/2.
  CHECK(xy.norm_bound == doctest::Approx(0.2).epsilon(1e-6));

  CHECK_THROWS_AS(constant_kernel(1.0), Error);
  CHECK_THROWS_AS(constant_kernel(-1.0), Error);  // |K| is what is measured
  CHECK_THROWS_AS(gaussian_kernel(0.5, 0.0), Error);
  CHECK_THROWS_AS(Kernel1D(nullptr, 0.0, 1.0), Error);
  CHECK_THROWS_AS(Kernel1D([](double, double) { return 0.1; }, 1.0, 0.0), Error);
}

TEST_CASE("the kernel catalog covers its three names") {
  CHECK(catalog_kernel("constant", 0.5).norm_bound ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(catalog_kernel("xy", 0.4).norm_bound == doctest::Approx(0.2).epsilon(1e-6));
  const Kernel1D gauss = catalog_kernel("gauss", 0.8);
  CHECK(gauss.norm_bound > 0.0);
  CHECK(gauss.norm_bound < 1.0);

  try {
    catalog_kernel("sinc", 0.5);
    FAIL("unknown kernel names must be configuration errors");
  } catch (const Error& err) {
    CHECK(err.category() == ErrorCategory::Config);
  }
}

TEST_CASE("estimator arguments are validated") {
  const Kernel1D kernel = constant_kernel(0.5);
  const SubStochasticWalk walk = default_subwalk(kernel);
  FredholmConfig config;
  config.n_walks = 16;

  CHECK_THROWS_AS(fredholm_estimate(kernel, nullptr, walk, 0.5, config), Error);
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, walk, 1.5, config), Error);
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, walk, -0.5, config), Error);

  FredholmConfig zero_walks = config;
  zero_walks.n_walks = 0;
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, walk, 0.5, zero_walks), Error);
  FredholmConfig zero_steps = config;
  zero_steps.max_steps = 0;
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, walk, 0.5, zero_steps), Error);

  SubStochasticWalk unset = walk;
  unset.sample_next = nullptr;
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, unset, 0.5, config), Error);
  SubStochasticWalk bad_delta = walk;
  bad_delta.delta = 0.0;
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, bad_delta, 0.5, config), Error);

  CHECK_THROWS_AS(default_subwalk(kernel, 0.0), Error);
  CHECK_THROWS_AS(default_subwalk(kernel, 1.0), Error);
  CHECK_THROWS_AS(default_subwalk(kernel, 0.9, 4), Error);
}

TEST_CASE("advertised walk laws are spot-checked") {
  const Kernel1D kernel = constant_kernel(0.5);

  // Claims delta = 0.5 but carries 0.9 of transition mass.
  SubStochasticWalk greedy;
  greedy.transition_density = [](double, double) { return 0.9; };
  greedy.kill_prob = [](double) { return 0.1; };
  greedy.sample_next = [](double, double u) { return u; };
  greedy.delta = 0.5;
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, greedy, 0.5, FredholmConfig{16}),
                  Error);

  // Kill probability that disagrees with the leftover mass.
  SubStochasticWalk lying = greedy;
  lying.delta = 0.1;
  lying.kill_prob = [](double) { return 0.3; };
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, lying, 0.5, FredholmConfig{16}),
                  Error);
}

TEST_CASE("invalid walk designs surface as solver errors mid-run") {
  const Kernel1D kernel = constant_kernel(0.5);
  FredholmConfig config;
  config.n_walks = 64;
  config.seed = 3;

  // Consistent nearly everywhere, but the kill probability vanishes at the
  // start point (which the coarse spot grid does not contain).
  SubStochasticWalk dead_at_start;
  dead_at_start.transition_density = [](double, double) { return 0.9; };
  dead_at_start.kill_prob = [](double x) { return x == 0.3 ? 0.0 : 0.1; };
  dead_at_start.sample_next = [](double, double u) { return u; };
  dead_at_start.delta = 0.1;
  try {
    fredholm_estimate(kernel, one, dead_at_start, 0.3, config);
    FAIL("a zero kill probability at a visited state must be a solver error");
  } catch (const Error& err) {
    CHECK(err.category() == ErrorCategory::Solver);
  }

  // A sampler that leaves the kernel domain.
  SubStochasticWalk runaway = dead_at_start;
  runaway.kill_prob = [](double) { return 0.1; };
  runaway.sample_next = [](double, double) { return 2.0; };
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, runaway, 0.5, config), Error);

  // A sampler that lands where its own density claims zero mass.
  SubStochasticWalk contradictory = dead_at_start;
  contradictory.kill_prob = [](double) { return 0.1; };
  contradictory.transition_density = [](double, double y) {
    return y == 0.5 ? 0.0 : 0.9;
  };
  contradictory.sample_next = [](double, double) { return 0.5; };
  CHECK_THROWS_AS(fredholm_estimate(kernel, one, contradictory, 0.5, config),
                  Error);
}

TEST_CASE("default subwalk realizes a piecewise-constant law") {
  // Half-supported kernel, aligned with the 128-cell sketch: density must
  // vanish below 0.5 and be exactly 0.9 * 0.5 / 0.25 = 1.8 above.
  const Kernel1D half_support(
      [](double, double y) { return y >= 0.5 ? 0.5 : 0.0; }, 0.0, 1.0);
  const SubStochasticWalk walk = default_subwalk(half_support);

  CHECK(walk.delta == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(walk.kill_prob(0.3) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(walk.transition_density(0.3, 0.25) == 0.0);
  CHECK(walk.transition_density(0.3, 0.75) == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(walk.transition_density(0.3, 1.5) == 0.0);  // outside the domain

  // Every sample lands in the supported half, never outside.
  for (int k = 0; k < 500; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / 500.0;
    const double y = walk.sample_next(0.3, u);
    CHECK(y >= 0.5);
    CHECK(y < 1.0);
    CHECK(walk.transition_density(0.3, y) > 0.0);
  }

  // Sampling frequencies across the sketch cells match the density: sweep a
  // regular grid of uniforms and histogram the outcomes.
  const int n_grid = 20000;
  std::vector<int> counts(128, 0);
  for (int k = 0; k < n_grid; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / n_grid;
    const double y = walk.sample_next(0.3, u);
    ++counts[std::min<std::size_t>(static_cast<std::size_t>(y * 128.0), 127)];
  }
  for (std::size_t cell = 0; cell < 128; ++cell) {
    const double mid = (static_cast<double>(cell) + 0.5) / 128.0;
    const double expected =
        walk.transition_density(0.3, mid) / 0.9 / 128.0;  // conditional mass
    CHECK(static_cast<double>(counts[cell]) / n_grid ==
          doctest::Approx(expected).scale(1.0).epsilon(5e-4));
  }

  // A vanishing row absorbs immediately.
  const Kernel1D xy = separable_kernel(0.4);
  const SubStochasticWalk xy_walk = default_subwalk(xy);
  CHECK(xy_walk.kill_prob(0.0) == 1.0);
  CHECK(xy_walk.transition_density(0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(xy_walk.sample_next(0.0, 0.5), Error);
}

TEST_CASE("walk lengths have the promised geometric tail") {
  // Drive the default law directly: with transition mass 0.9 everywhere,
  // P(length > n) = 0.9^{n+1}, and the contract guarantees the weaker
  // (1 - delta)^n envelope. 40000 walks put the noise floor far below the
  // 1.1 slack factor.
  const Kernel1D kernel = constant_kernel(0.5);
  const SubStochasticWalk walk = default_subwalk(kernel);

  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n_walks = 40000;
  const int max_track = 26;
  std::vector<int> longer_than(max_track, 0);  // longer_than[n] = #{len > n}
  double total_len = 0.0;
  for (int w = 0; w < n_walks; ++w) {
    double x = 0.5;
    int len = 0;
    while (unif(gen) >= walk.kill_prob(x)) {
      x = walk.sample_next(x, unif(gen));
      ++len;
      if (len > 2000) break;  // never happens; guards the test itself
    }
    total_len += len;
    for (int n = 0; n < max_track; ++n) longer_than[n] += len > n;
  }

  CHECK(total_len / n_walks == doctest::Approx(9.0).epsilon(0.03));
  for (int n = 0; n < max_track; ++n) {
    const double tail = static_cast<double>(longer_than[n]) / n_walks;
    CHECK(tail <= std::pow(1.0 - walk.delta, n) * 1.1);
  }

  // The estimator's own stepping obeys the same mean length.
  FredholmConfig config;
  config.n_walks = 2000;
  config.seed = 9;
  const EstimateReport report =
      fredholm_estimate(kernel, one, walk, 0.5, config);
  CHECK(report.mean_walk_length == doctest::Approx(9.0).epsilon(0.1));
  CHECK(report.truncated_walks == 0);
  CHECK(report.overflowed_walks == 0);
}

TEST_CASE("constant kernel at level one half solves to two") {
  const Kernel1D kernel = constant_kernel(0.5);
  const SubStochasticWalk walk = default_subwalk(kernel);

  FredholmConfig config;
  config.n_walks = 20000;
  config.seed = 77;
  const EstimateReport report = fredholm_estimate(kernel, one, walk, 0.3, config);

  const double sigma = std::sqrt(report.sample_variance[0] /
                                 static_cast<double>(config.n_walks));
  REQUIRE(sigma > 0.0);
  CHECK(std::abs(report.estimate[0] - 2.0) <= 4.0 * sigma);

  // The deterministic cross-check lands on the same constant, node by node.
  const LinearSystem nystrom = nystrom_discretize(kernel, one, 33);
  const Vector f = gauss_solve(nystrom.a, nystrom.b);
  for (double v : f) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("estimates are reproducible and thread-count invariant") {
  const Kernel1D kernel = constant_kernel(0.5);
  const SubStochasticWalk walk = default_subwalk(kernel);
  FredholmConfig config;
  config.n_walks = 4000;
  config.seed = 5;

  const EstimateReport once = fredholm_estimate(kernel, one, walk, 0.5, config);
  const EstimateReport twice = fredholm_estimate(kernel, one, walk, 0.5, config);
  CHECK(once.estimate[0] == twice.estimate[0]);
  CHECK(once.sample_variance[0] == twice.sample_variance[0]);

  FredholmConfig threaded = config;
  threaded.threads = 4;
  const EstimateReport parallel =
      fredholm_estimate(kernel, one, walk, 0.5, threaded);
  CHECK(parallel.estimate[0] == once.estimate[0]);
  CHECK(parallel.total_steps == once.total_steps);

  FredholmConfig reseeded = config;
  reseeded.seed = 6;
  CHECK(fredholm_estimate(kernel, one, walk, 0.5, reseeded).estimate[0] !=
        once.estimate[0]);
}

TEST_CASE("separable kernel matches its closed form and the nystrom path") {
  const double scale = 0.4;
  const Kernel1D kernel = separable_kernel(scale);

  // Nystrom errors against the closed form shrink as the grid refines.
  double previous = 1e9;
  for (std::size_t n_nodes : {25, 50, 100, 200}) {
    const LinearSystem sys = nystrom_discretize(kernel, one, n_nodes);
    const Vector f = gauss_solve(sys.a, sys.b);
    const Vector nodes = nystrom_nodes(kernel, n_nodes);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      worst = std::max(worst,
                       std::abs(f[i] - separable_solution(scale, nodes[i])));
    }
    CHECK(worst < previous);
    previous = worst;
  }
  CHECK(previous < 1e-4);

  // The walk estimator agrees with the same solution at an interior point.
  const SubStochasticWalk walk = default_subwalk(kernel);
  FredholmConfig config;
  config.n_walks = 20000;
  config.seed = 12;
  const EstimateReport report = fredholm_estimate(kernel, one, walk, 0.7, config);
  const double sigma = std::sqrt(report.sample_variance[0] /
                                 static_cast<double>(config.n_walks));
  CHECK(std::abs(report.estimate[0] - separable_solution(scale, 0.7)) <=
        4.0 * sigma);
}

TEST_CASE("walks that outlive max_steps are counted and flagged") {
  const Kernel1D kernel = constant_kernel(0.5);
  const SubStochasticWalk walk = default_subwalk(kernel);
  FredholmConfig config;
  config.n_walks = 300;
  config.seed = 21;
  config.max_steps = 1;

  const EstimateReport report = fredholm_estimate(kernel, one, walk, 0.5, config);
  CHECK(report.truncated_walks > 0);
  REQUIRE_FALSE(report.warnings.empty());
  CHECK(report.warnings[0].find("max_steps") != std::string::npos);
}

TEST_CASE("nystrom rejects degenerate grids") {
  const Kernel1D kernel = constant_kernel(0.5);
  CHECK_THROWS_AS(nystrom_nodes(kernel, 1), Error);
  CHECK_THROWS_AS(nystrom_discretize(kernel, nullptr, 16), Error);
  const Vector nodes = nystrom_nodes(kernel, 5);
  CHECK(nodes.front() == 0.0);
  CHECK(nodes.back() == 1.0);
  CHECK(nodes[2] == doctest::Approx(0.5).epsilon(1e-15));
}
