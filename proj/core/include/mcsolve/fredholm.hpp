#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mcsolve/linear_system.hpp"
#include "mcsolve/types.hpp"
#include "mcsolve/walk.hpp"

namespace mcsolve {

/// Continuous kernel of a second-kind integral equation on [lo, hi]:
///   f(x) = g(x) + integral K(x, y) f(y) dy.
/// Construction measures sup_x of integral |K(x, y)| dy by quadrature and
/// rejects kernels that are not a clear contraction (bound must stay below
/// 1 - kKernelNormTolerance). The check samples the kernel on a grid, so it
/// assumes K varies smoothly at that resolution.
struct Kernel1D {
  std::function<double(double, double)> k;
  double lo = 0.0;
  double hi = 1.0;
  double norm_bound = 0.0;  ///< measured sup_x integral |K(x,y)| dy

  Kernel1D(std::function<double(double, double)> k_in, double lo_in, double hi_in);
};

inline constexpr double kKernelNormTolerance = 1e-6;

/// Sub-stochastic transition law driving the continuous-state walk. The
/// walk survives a step from x with probability 1 - kill_prob(x) and then
/// moves with unconditional density transition_density(x, .), whose mass is
/// exactly 1 - kill_prob(x) and at most 1 - delta. The sampler must realize
/// precisely that law: sample_next(x, u) maps one uniform to the next state
/// with density transition_density(x, .) / (1 - kill_prob(x)).
struct SubStochasticWalk {
  std::function<double(double, double)> transition_density;
  std::function<double(double)> kill_prob;
  std::function<double(double, double)> sample_next;
  double delta = 0.1;  ///< uniform survival margin: integral P(x,.) <= 1 - delta
};

struct FredholmConfig {
  std::size_t n_walks = 10000;
  std::uint64_t seed = 0;
  std::size_t max_steps = 10000;  ///< hard cap; hits are counted, score 0
  unsigned threads = 1;           ///< 0 = hardware concurrency
};

/// Walks whose multiplicative weight exceeds this magnitude are dropped
/// (scored as zero) and counted in EstimateReport::overflowed_walks.
inline constexpr double kFredholmWeightGuard = 1e12;

/// Absorption estimator for f(x0): runs walks X_0 = x0 -> X_1 -> ... that
/// die at X_n with probability kill_prob(X_n), multiply the weight by
/// K(X_{n-1}, X_n) / P(X_{n-1}, X_n) per survived step, and score
///   g(X_tau) / kill_prob(X_tau) * weight
/// once, at death. Unbiased for any sub-stochastic law whose density is
/// positive wherever K is nonzero. A kill probability that is not strictly
/// positive at a visited state makes the score undefined and is reported as
/// a Solver error.
EstimateReport fredholm_estimate(const Kernel1D& kernel,
                                 const std::function<double(double)>& g,
                                 const SubStochasticWalk& walk, double x0,
                                 const FredholmConfig& config);

/// Ready-made sub-stochastic law for a kernel: from x, the walk survives
/// with the constant probability `survival` (so delta = 1 - survival) and
/// moves with density proportional to a piecewise-constant sketch of
/// |K(x, .)| on `bins` equal cells. States whose whole row vanishes absorb
/// immediately. The density reported to the estimator is exactly the
/// sampling law, so the sketch resolution only affects variance, not bias —
/// provided |K(x, .)| never vanishes at a cell midpoint while being nonzero
/// elsewhere in that cell (holds for the catalog kernels).
SubStochasticWalk default_subwalk(const Kernel1D& kernel, double survival = 0.9,
                                  std::size_t bins = 128);

/// Deterministic cross-check: composite-trapezoid Nystrom discretization of
/// the integral equation on n_nodes equispaced nodes, returned as the dense
/// system (I - K w) f = g over the node values.
LinearSystem nystrom_discretize(const Kernel1D& kernel,
                                const std::function<double(double)>& g,
                                std::size_t n_nodes);

/// The node abscissae used by nystrom_discretize.
Vector nystrom_nodes(const Kernel1D& kernel, std::size_t n_nodes);

// -- example kernels ---------------------------------------------------------

/// K(x, y) = level on [0, 1]. With g = 1 and level = 0.5 the solution is
/// the constant 2.
Kernel1D constant_kernel(double level);

/// K(x, y) = scale * x * y on [0, 1].
Kernel1D separable_kernel(double scale);

/// K(x, y) = amplitude * exp(-(x - y)^2 / (2 width^2)) on [0, 1].
Kernel1D gaussian_kernel(double amplitude, double width = 0.25);

/// Lookup by name ("constant", "xy", "gauss") for the command-line tool;
/// `param` feeds the kernel's leading coefficient. Unknown names are a
/// Config error.
Kernel1D catalog_kernel(const std::string& name, double param);

}  // namespace mcsolve
