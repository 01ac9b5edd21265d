#include <cmath>
#include <set>

#include "doctest.h"
#include "mcsolve/boosting.hpp"
#include "mcsolve/gaussian_elimination.hpp"
#include "mcsolve/io.hpp"
#include "mcsolve/problems.hpp"
#include "test_support.hpp"

using namespace mcsolve;

namespace {

// A fixed-point instance with a cached radius, plus the elimination answer.
struct Instance {
  FixedPointSystem fp;
  Vector x_exact;
};

Instance make_instance(std::size_t m, double scale, std::uint64_t seed) {
  const LinearSystem sys = gen_diag_dominant(m, scale, seed);
  FixedPointSystem fp = build_fixed_point(sys);
  fp = fp.with_rho(estimate_spectral_radius(fp.h).value);
  return {fp, gauss_solve(sys.a, sys.b)};
}

ChainKernel adjoint_kernel(const FixedPointSystem& fp, Termination term) {
  return kernel_from_operator(fp.h, fp.c, WalkMode::Adjoint, std::move(term));
}

}  // namespace

TEST_CASE("kappa estimate is the tail geometric mean") {
  CHECK(estimate_kappa({1.0, 0.1, 0.01, 0.001}) ==
        doctest::Approx(0.1).epsilon(1e-12));
  CHECK(estimate_kappa({8.0, 4.0, 2.0, 1.0}) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // The first entry is excluded, so a wild round 0 does not matter.
  CHECK(estimate_kappa({1e6, 4.0, 2.0, 1.0}) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(estimate_kappa({1.0, 0.5, 0.25}) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(estimate_kappa({1.0, 0.5}), Error);
  CHECK_THROWS_AS(estimate_kappa({1.0, 0.0, 0.5, 0.1}), Error);
  CHECK_THROWS_AS(estimate_kappa({1.0, -0.5, 0.25}), Error);
}

TEST_CASE("systematic pps reports exact inclusion probabilities") {
  // No item reaches certainty here: pi_i = n * w_i / sum(w).
  const Vector weights{0.30, 0.22, 0.18, 0.13, 0.10, 0.07};
  const std::size_t n = 3;

  // Sweep a fine grid of u; a regular grid measures each item's selection
  // set to within (#breakpoints)/N, far tighter than the 1e-4 we ask for.
  const int grid = 200000;
  Vector measured(6, 0.0);
  for (int k = 0; k < grid; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / grid;
    const PpsSample sample = systematic_pps_select(weights, n, u);
    REQUIRE(sample.indices.size() == n);
    // Ascending, distinct, aligned probabilities that match the formula.
    for (std::size_t j = 0; j < n; ++j) {
      if (j > 0) REQUIRE(sample.indices[j] > sample.indices[j - 1]);
      const std::size_t i = sample.indices[j];
      REQUIRE(sample.inclusion_probability[j] ==
              doctest::Approx(3.0 * weights[i]).epsilon(1e-12));
      measured[i] += 1.0;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(measured[i] / grid ==
          doctest::Approx(3.0 * weights[i]).epsilon(1e-4));
    total += measured[i] / grid;
  }
  CHECK(total == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("pps certainty pass peels heavy items") {
  // Item 0 holds half the mass: with n = 3 it is included always, and the
  // remaining budget of 2 is spread over the rest (pi = 2 * w / 0.5).
  const Vector weights{0.50, 0.20, 0.15, 0.10, 0.05};
  const Vector expected_pi{1.0, 0.8, 0.6, 0.4, 0.2};

  const int grid = 100000;
  Vector measured(5, 0.0);
  for (int k = 0; k < grid; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / grid;
    const PpsSample sample = systematic_pps_select(weights, 3, u);
    REQUIRE(sample.indices.size() == 3);
    REQUIRE(sample.indices[0] == 0);
    REQUIRE(sample.inclusion_probability[0] == 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t i = sample.indices[j];
      REQUIRE(sample.inclusion_probability[j] ==
              doctest::Approx(expected_pi[i]).epsilon(1e-12));
      measured[i] += 1.0;
    }
  }
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(measured[i] / grid == doctest::Approx(expected_pi[i]).epsilon(1e-4));
  }
}

TEST_CASE("pps degenerate shapes") {
  // Single supported item: certain regardless of u.
  const PpsSample lone = systematic_pps_select({0.0, 0.0, 0.0, 5.0, 0.0}, 1, 0.37);
  CHECK(lone.indices == std::vector<std::size_t>{3});
  CHECK(lone.inclusion_probability == Vector{1.0});

  // Budget covers the whole support: everything comes back with pi = 1.
  const PpsSample all = systematic_pps_select({1.0, 2.0, 3.0}, 3, 0.9);
  CHECK(all.indices == std::vector<std::size_t>{0, 1, 2});
  for (double p : all.inclusion_probability) CHECK(p == 1.0);

  CHECK_THROWS_AS(systematic_pps_select({1.0, 1.0}, 0, 0.5), Error);
  CHECK_THROWS_AS(systematic_pps_select({1.0, 1.0}, 1, 1.0), Error);
  CHECK_THROWS_AS(systematic_pps_select({1.0, 1.0}, 1, -0.1), Error);
  CHECK_THROWS_AS(systematic_pps_select({1.0, -1.0}, 1, 0.5), Error);
  CHECK_THROWS_AS(systematic_pps_select({0.0, 0.0}, 1, 0.5), Error);
}

TEST_CASE("sampled correction short-circuits a zero defect") {
  const Instance inst = make_instance(6, 0.5, 21);
  const FixedPointSystem settled(inst.fp.h, Vector(6, 0.0), inst.fp.rho);
  const Vector z = sampled_correction(settled, 3, 99);
  CHECK(z == Vector(6, 0.0));

  CHECK_THROWS_AS(sampled_correction(inst.fp, 0, 1), Error);
  CHECK_THROWS_AS(sampled_correction(inst.fp, 7, 1), Error);
}

TEST_CASE("full-width sampling reduces to the plain adjoint estimate") {
  // With sample_cols = m every inclusion probability is 1, so the
  // Horvitz-Thompson right-hand side is the defect itself and the run must
  // reproduce a direct adjoint estimate draw for draw.
  const Instance inst = make_instance(7, 0.55, 33);

  SampledCorrectionOptions options;
  options.n_walks = 500;
  options.termination = KillingProb{0.25};
  options.stream_tag = 3;
  const Vector sampled = sampled_correction(inst.fp, 7, 77, options);

  WalkConfig walk;
  walk.kernel = kernel_from_operator(inst.fp.h, inst.fp.c, WalkMode::Adjoint,
                                     KillingProb{0.25});
  walk.n_walks = 500;
  walk.seed = 77;
  walk.stream_tag = 3;
  const Vector direct = adjoint_estimate(inst.fp, walk).estimate;
  CHECK(sampled == direct);
}

TEST_CASE("sampled corrections are unbiased for the exact correction") {
  // Average over independent seeds: both the coordinate subsampling and the
  // walks are unbiased, so the mean converges to (I - H)^{-1} d.
  const Instance inst = make_instance(6, 0.5, 55);
  const std::size_t m = 6;

  Matrix i_minus_h = [&] {
    Vector values(m * m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        values[i * m + j] = (i == j ? 1.0 : 0.0) - inst.fp.h.at(i, j);
      }
    }
    return Matrix::dense(m, m, std::move(values));
  }();
  const Vector exact = gauss_solve(i_minus_h, inst.fp.c);

  SampledCorrectionOptions options;
  options.n_walks = 400;
  options.termination = KillingProb{0.2};

  const std::size_t trials = 400;
  Vector mean(m, 0.0);
  std::vector<Vector> draws(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    draws[t] = sampled_correction(inst.fp, 2, 9000 + t, options);
    for (std::size_t i = 0; i < m; ++i) mean[i] += draws[t][i];
  }
  for (double& v : mean) v /= static_cast<double>(trials);

  for (std::size_t i = 0; i < m; ++i) {
    double var = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      var += (draws[t][i] - mean[i]) * (draws[t][i] - mean[i]);
    }
    var /= static_cast<double>(trials - 1);
    const double sigma = std::sqrt(var / static_cast<double>(trials));
    CHECK(std::abs(mean[i] - exact[i]) <= 5.0 * sigma + 1e-12);
  }
}

TEST_CASE("boosting configuration is validated") {
  const Instance inst = make_instance(5, 0.5, 1);

  BoostConfig config;
  config.inner.kernel = adjoint_kernel(inst.fp, KillingProb{0.2});
  config.inner.n_walks = 100;

  BoostConfig bad = config;
  bad.rounds = 0;
  CHECK_THROWS_AS(boost_solve(inst.fp, bad), Error);

  bad = config;
  bad.target_residual = 0.0;
  CHECK_THROWS_AS(boost_solve(inst.fp, bad), Error);

  bad = config;
  bad.variant = BoostConfig::Variant::Sampled;
  bad.sample_cols = 6;
  CHECK_THROWS_AS(boost_solve(inst.fp, bad), Error);

  // The kernel must be the adjoint kernel of this very operator object;
  // a forward-mode kernel or one built from a value-equal copy is refused,
  // because round-over-round reuse of the transition table is the point.
  bad = config;
  bad.inner.kernel =
      kernel_from_operator(inst.fp.h, inst.fp.c, WalkMode::Forward, KillingProb{0.2});
  CHECK_THROWS_AS(boost_solve(inst.fp, bad), Error);

  const Matrix copy = inst.fp.h.to_dense();  // fresh storage, same values
  REQUIRE_FALSE(copy.shares_storage_with(inst.fp.h));
  bad = config;
  bad.inner.kernel =
      kernel_from_operator(copy, inst.fp.c, WalkMode::Adjoint, KillingProb{0.2});
  CHECK_THROWS_AS(boost_solve(inst.fp, bad), Error);
}

TEST_CASE("an already-converged start returns immediately") {
  const Instance inst = make_instance(5, 0.5, 2);
  BoostConfig config;
  config.inner.kernel = adjoint_kernel(inst.fp, KillingProb{0.2});
  config.inner.n_walks = 0;  // start from the zero vector
  config.target_residual = 2.0;  // ||c|| / ||c|| = 1 already qualifies

  const BoostResult result = boost_solve(inst.fp, config);
  CHECK(result.converged);
  CHECK(result.rounds_used == 0);
  CHECK(result.residual_history.empty());
  CHECK(result.x == Vector(5, 0.0));
  CHECK(result.total_walks == 0);
}

TEST_CASE("the elimination inner solver converges in one round") {
  const Instance inst = make_instance(30, 0.6, 7);
  BoostConfig config;
  config.inner.kernel = adjoint_kernel(inst.fp, KillingProb{0.2});
  config.inner.n_walks = 0;
  config.direct_inner = true;
  config.target_residual = 1e-12;

  const BoostResult result = boost_solve(inst.fp, config);
  CHECK(result.converged);
  CHECK(result.rounds_used == 1);
  REQUIRE(result.residual_history.size() == 1);
  CHECK(result.residual_history[0] / norm2(inst.fp.c) <= 1e-12);
  CHECK(test_support::rel_error(result.x, inst.x_exact) < 1e-10);
}

TEST_CASE("exact-variant boosting contracts geometrically") {
  const Instance inst = make_instance(50, 0.55, 11);
  BoostConfig config;
  config.inner.kernel = adjoint_kernel(inst.fp, KillingProb{0.2});
  config.inner.n_walks = 4000;
  config.inner.seed = 5;
  config.rounds = 20;
  config.target_residual = 1e-6;

  const BoostResult result = boost_solve(inst.fp, config);
  CHECK(result.converged);
  CHECK(result.rounds_used <= 20);
  CHECK(result.residual_history.back() / norm2(inst.fp.c) <= 1e-6);
  CHECK(test_support::rel_error(result.x, inst.x_exact) < 1e-5);
  CHECK(result.total_walks == (result.rounds_used + 1) * config.inner.n_walks);

  // Residuals should fall in the vast majority of rounds...
  std::size_t drops = 0;
  for (std::size_t k = 1; k < result.residual_history.size(); ++k) {
    drops += result.residual_history[k] < result.residual_history[k - 1];
  }
  CHECK(drops * 10 >= (result.residual_history.size() - 1) * 8);

  // ...and the measured contraction factor must look like one.
  REQUIRE(result.kappa_estimate.has_value());
  CHECK(*result.kappa_estimate > 0.0);
  CHECK(*result.kappa_estimate < 0.9);

  // Same configuration, same history, byte for byte.
  const BoostResult again = boost_solve(inst.fp, config);
  CHECK(again.x == result.x);
  CHECK(again.residual_history == result.residual_history);
}

TEST_CASE("sampled-variant boosting converges on subsampled defects") {
  const Instance inst = make_instance(40, 0.5, 13);
  BoostConfig config;
  config.inner.kernel = adjoint_kernel(inst.fp, KillingProb{0.2});
  config.inner.n_walks = 3000;
  config.inner.seed = 8;
  config.variant = BoostConfig::Variant::Sampled;
  config.sample_cols = 10;
  config.rounds = 40;
  config.target_residual = 1e-4;

  const BoostResult result = boost_solve(inst.fp, config);
  CHECK(result.converged);
  CHECK(result.residual_history.back() / norm2(inst.fp.c) <= 1e-4);
  CHECK(test_support::rel_error(result.x, inst.x_exact) < 1e-3);
}

TEST_CASE("deterministic polish finishes what the walks started") {
  const Instance inst = make_instance(25, 0.5, 17);
  BoostConfig config;
  config.inner.kernel = adjoint_kernel(inst.fp, KillingProb{0.2});
  config.inner.n_walks = 500;
  config.rounds = 1;
  config.target_residual = 1e-10;  // far beyond one stochastic round

  const BoostResult rough = boost_solve(inst.fp, config);
  CHECK_FALSE(rough.converged);

  config.deterministic_polish = true;
  config.polish_sweeps = 60;
  const BoostResult polished = boost_solve(inst.fp, config);
  CHECK(polished.converged);
  CHECK(test_support::rel_error(polished.x, inst.x_exact) < 1e-9);
}

TEST_CASE("residual histories serialize to csv") {
  test_support::ScratchDir dir;
  BoostResult result;
  result.residual_history = {0.5, 0.05, 0.005};

  const std::string path = dir.file("history.csv");
  write_residual_history_csv(path, result);
  const std::string text = test_support::read_file(path);
  CHECK(text.find("round,residual") == 0);
  CHECK(text.find("1,0.5") != std::string::npos);
  CHECK(text.find("2,0.05") != std::string::npos);
  CHECK(text.find("3,0.005") != std::string::npos);
}
