#include "mcsolve/fredholm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "mcsolve/parallel.hpp"
#include "mcsolve/rng.hpp"

namespace mcsolve {

namespace {

constexpr std::size_t kNormCheckX = 257;    // sup sampled over this many states
constexpr std::size_t kNormCheckY = 1024;   // midpoint cells per integral
constexpr std::size_t kSpotCheckX = 9;      // walk-law consistency probes
constexpr double kMassTolerance = 5e-3;     // slack for quadrature + user laws
constexpr double kTinyRowMass = 1e-300;

/// Midpoint-rule integral of fn over [lo, hi] with n cells. Midpoints keep
/// the rule exact for the piecewise-constant densities default_subwalk
/// builds (cell counts divide kNormCheckY).
template <typename Fn>
double midpoint_integral(Fn&& fn, double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += fn(lo + (static_cast<double>(i) + 0.5) * h);
  }
  return s * h;
}

void check_walk_law(const Kernel1D& kernel, const SubStochasticWalk& walk) {
  if (!walk.transition_density || !walk.kill_prob || !walk.sample_next) {
    throw config_error("sub-stochastic walk has an unset function");
  }
  if (!(walk.delta > 0.0) || walk.delta > 1.0) {
    throw config_error("sub-stochastic walk delta must lie in (0, 1]");
  }
  // spot-check the advertised law on a coarse grid: transition mass at most
  // 1 - delta, and kill_prob consistent with the leftover mass
  for (std::size_t i = 0; i < kSpotCheckX; ++i) {
    const double x = kernel.lo + (kernel.hi - kernel.lo) *
                                     static_cast<double>(i) /
                                     static_cast<double>(kSpotCheckX - 1);
    const double mass = midpoint_integral(
        [&](double y) { return walk.transition_density(x, y); }, kernel.lo,
        kernel.hi, kNormCheckY);
    if (!std::isfinite(mass)) {
      throw config_error("transition density is non-finite near x = " +
                         std::to_string(x));
    }
    if (mass > 1.0 - walk.delta + kMassTolerance) {
      throw config_error("transition density mass " + std::to_string(mass) +
                         " at x = " + std::to_string(x) +
                         " exceeds 1 - delta = " + std::to_string(1.0 - walk.delta));
    }
    const double kill = walk.kill_prob(x);
    if (std::abs(kill - (1.0 - mass)) > kMassTolerance) {
      throw config_error("kill_prob(" + std::to_string(x) + ") = " +
                         std::to_string(kill) +
                         " is inconsistent with transition mass " +
                         std::to_string(mass));
    }
  }
}

struct FredholmBlock {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t steps = 0;
  std::size_t truncated = 0;
  std::size_t overflowed = 0;
};

}  // namespace

Kernel1D::Kernel1D(std::function<double(double, double)> k_in, double lo_in,
                   double hi_in)
    : k(std::move(k_in)), lo(lo_in), hi(hi_in) {
  if (!k) throw config_error("kernel function is not set");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw config_error("kernel domain [lo, hi] is invalid");
  }
  double sup = 0.0;
  for (std::size_t i = 0; i < kNormCheckX; ++i) {
    const double x =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kNormCheckX - 1);
    const double row = midpoint_integral(
        [&](double y) { return std::abs(k(x, y)); }, lo, hi, kNormCheckY);
    if (!std::isfinite(row)) {
      throw config_error("kernel row integral is non-finite at x = " +
                         std::to_string(x));
    }
    sup = std::max(sup, row);
  }
  if (sup >= 1.0 - kKernelNormTolerance) {
    throw config_error("kernel is not a contraction: sup integral |K| dy ~ " +
                       std::to_string(sup) + " (needs < 1)");
  }
  norm_bound = sup;
}

EstimateReport fredholm_estimate(const Kernel1D& kernel,
                                 const std::function<double(double)>& g,
                                 const SubStochasticWalk& walk, double x0,
                                 const FredholmConfig& config) {
  if (!g) throw config_error("source term g is not set");
  if (config.n_walks == 0) throw config_error("n_walks must be positive");
  if (config.max_steps == 0) throw config_error("max_steps must be positive");
  if (!(x0 >= kernel.lo) || !(x0 <= kernel.hi)) {
    throw config_error("start point x0 = " + std::to_string(x0) +
                       " lies outside the kernel domain");
  }
  check_walk_law(kernel, walk);

  const RandomStream stream(config.seed, kDomainFredholm);
  std::vector<FredholmBlock> blocks(block_count(config.n_walks));

  run_blocks(config.n_walks, config.threads, [&](std::size_t b, std::size_t begin,
                                                 std::size_t end) {
    FredholmBlock& acc = blocks[b];
    for (std::size_t w = begin; w < end; ++w) {
      double x = x0;
      double weight = 1.0;
      std::uint32_t draw = 0;
      for (std::size_t step = 0;; ++step) {
        const double kill = walk.kill_prob(x);
        if (!(kill > 0.0)) {
          throw solver_error("kill probability is not positive at state x = " +
                             std::to_string(x) + "; the walk design is invalid");
        }
        if (stream.uniform(w, draw++) < kill) {
          const double score = weight * g(x) / std::min(kill, 1.0);
          acc.sum += score;
          acc.sum_sq += score * score;
          break;
        }
        if (step >= config.max_steps) {
          ++acc.truncated;  // never died; contributes zero
          break;
        }
        const double y = walk.sample_next(x, stream.uniform(w, draw++));
        if (!(y >= kernel.lo) || !(y <= kernel.hi)) {
          throw solver_error("walk sampler left the domain: y = " +
                             std::to_string(y));
        }
        const double density = walk.transition_density(x, y);
        if (!(density > 0.0)) {
          throw solver_error("transition density vanishes at a sampled move (x = " +
                             std::to_string(x) + ", y = " + std::to_string(y) + ")");
        }
        weight *= kernel.k(x, y) / density;
        ++acc.steps;
        if (std::abs(weight) > kFredholmWeightGuard) {
          ++acc.overflowed;  // flagged, scored as zero
          break;
        }
        x = y;
      }
    }
  });

  // combine per-block sums in block order: bytewise identical across threads
  double sum = 0.0;
  double sum_sq = 0.0;
  EstimateReport report;
  for (const FredholmBlock& b : blocks) {
    sum += b.sum;
    sum_sq += b.sum_sq;
    report.total_steps += b.steps;
    report.truncated_walks += b.truncated;
    report.overflowed_walks += b.overflowed;
  }
  const double n = static_cast<double>(config.n_walks);
  const double mean = sum / n;
  report.estimate = {mean};
  report.sample_variance = {config.n_walks > 1
                                ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0))
                                : 0.0};
  report.n_walks = config.n_walks;
  report.mean_walk_length = static_cast<double>(report.total_steps) / n;
  if (report.truncated_walks > 0) {
    report.warnings.push_back(std::to_string(report.truncated_walks) +
                              " walk(s) hit the max_steps cap before absorption "
                              "and scored zero; raise max_steps");
  }
  if (report.overflowed_walks > 0) {
    report.warnings.push_back(std::to_string(report.overflowed_walks) +
                              " walk(s) tripped the weight-overflow guard and "
                              "scored zero; the transition law matches the "
                              "kernel poorly");
  }
  return report;
}

SubStochasticWalk default_subwalk(const Kernel1D& kernel, double survival,
                                  std::size_t bins) {
  if (!(survival > 0.0) || !(survival < 1.0)) {
    throw config_error("default_subwalk survival must lie in (0, 1)");
  }
  if (bins < 8) throw config_error("default_subwalk needs at least 8 bins");

  // shared immutable row sketch: cell weights are |K(x, midpoint)|, so the
  // conditional law is piecewise constant and can be described, sampled,
  // and evaluated in exact agreement
  struct Sketch {
    std::function<double(double, double)> k;
    double lo, hi, width, survival;
    std::size_t bins;

    std::vector<double> row(double x) const {
      std::vector<double> w(bins);
      for (std::size_t b = 0; b < bins; ++b) {
        w[b] = std::abs(k(x, lo + (static_cast<double>(b) + 0.5) * width));
      }
      return w;
    }
  };
  auto sketch = std::make_shared<const Sketch>(
      Sketch{kernel.k, kernel.lo, kernel.hi, (kernel.hi - kernel.lo) / bins,
             survival, bins});

  SubStochasticWalk walk;
  walk.delta = 1.0 - survival;
  walk.kill_prob = [sketch](double x) {
    const std::vector<double> w = sketch->row(x);
    double total = 0.0;
    for (double v : w) total += v;
    return total <= kTinyRowMass ? 1.0 : 1.0 - sketch->survival;
  };
  walk.transition_density = [sketch](double x, double y) {
    if (y < sketch->lo || y > sketch->hi) return 0.0;
    const std::vector<double> w = sketch->row(x);
    double total = 0.0;
    for (double v : w) total += v;
    if (total <= kTinyRowMass) return 0.0;
    auto cell = static_cast<std::size_t>((y - sketch->lo) / sketch->width);
    cell = std::min(cell, sketch->bins - 1);
    return sketch->survival * w[cell] / (total * sketch->width);
  };
  walk.sample_next = [sketch](double x, double u) {
    const std::vector<double> w = sketch->row(x);
    double total = 0.0;
    for (double v : w) total += v;
    if (total <= kTinyRowMass) {
      throw solver_error("sampled a transition from an absorbing state x = " +
                         std::to_string(x));
    }
    // stacked inverse CDF: the same uniform picks the cell and the offset
    // inside it, which realizes exactly the piecewise-constant density
    double target = u * total;
    for (std::size_t b = 0; b < sketch->bins; ++b) {
      if (target < w[b] || b + 1 == sketch->bins) {
        double frac = w[b] > 0.0 ? target / w[b] : 0.0;
        frac = std::clamp(frac, 0.0, 1.0 - 1e-12);
        return sketch->lo + (static_cast<double>(b) + frac) * sketch->width;
      }
      target -= w[b];
    }
    return sketch->hi;  // unreachable
  };
  return walk;
}

Vector nystrom_nodes(const Kernel1D& kernel, std::size_t n_nodes) {
  if (n_nodes < 2) throw config_error("nystrom needs at least 2 nodes");
  Vector nodes(n_nodes);
  const double h = (kernel.hi - kernel.lo) / static_cast<double>(n_nodes - 1);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    nodes[i] = kernel.lo + static_cast<double>(i) * h;
  }
  return nodes;
}

LinearSystem nystrom_discretize(const Kernel1D& kernel,
                                const std::function<double(double)>& g,
                                std::size_t n_nodes) {
  if (!g) throw config_error("source term g is not set");
  const Vector nodes = nystrom_nodes(kernel, n_nodes);
  const double h = (kernel.hi - kernel.lo) / static_cast<double>(n_nodes - 1);

  Vector a(n_nodes * n_nodes);
  Vector b(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    for (std::size_t j = 0; j < n_nodes; ++j) {
      const double wj = (j == 0 || j + 1 == n_nodes) ? 0.5 * h : h;
      a[i * n_nodes + j] =
          (i == j ? 1.0 : 0.0) - kernel.k(nodes[i], nodes[j]) * wj;
    }
    b[i] = g(nodes[i]);
  }
  return LinearSystem(Matrix::dense(n_nodes, n_nodes, std::move(a)), std::move(b));
}

Kernel1D constant_kernel(double level) {
  return Kernel1D([level](double, double) { return level; }, 0.0, 1.0);
}

Kernel1D separable_kernel(double scale) {
  return Kernel1D([scale](double x, double y) { return scale * x * y; }, 0.0, 1.0);
}

Kernel1D gaussian_kernel(double amplitude, double width) {
  if (!(width > 0.0)) throw config_error("gaussian kernel width must be positive");
  const double inv = 1.0 / (2.0 * width * width);
  return Kernel1D(
      [amplitude, inv](double x, double y) {
        const double d = x - y;
        return amplitude * std::exp(-d * d * inv);
      },
      0.0, 1.0);
}

Kernel1D catalog_kernel(const std::string& name, double param) {
  if (name == "constant") return constant_kernel(param);
  if (name == "xy") return separable_kernel(param);
  if (name == "gauss") return gaussian_kernel(param);
  throw config_error("unknown kernel '" + name +
                     "' (expected constant, xy, or gauss)");
}

}  // namespace mcsolve
