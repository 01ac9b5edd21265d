#include "benchlib.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>

#include "mcsolve/boosting.hpp"
#include "mcsolve/gaussian_elimination.hpp"
#include "mcsolve/io.hpp"
#include "mcsolve/problems.hpp"
#include "mcsolve/stationary.hpp"

namespace mcsolve::bench {

namespace {

template <typename Fn>
double timed(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double relative_system_residual(const LinearSystem& sys, const Vector& x) {
  const double bn = norm2(sys.b);
  return norm2(residual(sys, x)) / (bn > 0.0 ? bn : 1.0);
}

std::ofstream open_csv(const std::string& path) {
  ensure_parent_directory(path);
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  return out;
}

void finish_csv(std::ofstream& out, const std::string& path) {
  if (!out) throw config_error("write failed for " + path);
}

/// One (size, method) measurement: `run` produces one timed sample, `finish`
/// reads residual and bookkeeping out of the last run. Each cell's repeats
/// run consecutively after an untimed warmup, so every sample sees the
/// caches the method itself warms — the steady state the scaling shapes are
/// about — rather than whatever the previous cell left behind.
struct ScalingCell {
  BenchRecord rec;
  std::function<void()> run;
  std::function<void(BenchRecord&)> finish;
  std::vector<double> times;
};

ScalingCell make_scaling_cell(std::shared_ptr<const LinearSystem> sys,
                              std::shared_ptr<const FixedPointSystem> fp,
                              std::size_t m, const std::string& method,
                              const ScalingOptions& opts) {
  ScalingCell cell;
  cell.rec.method = method;
  cell.rec.m = m;
  cell.rec.extra.emplace_back("seed", std::to_string(opts.seed));
  cell.times.reserve(opts.repeats);

  if (method == "jacobi" || method == "gauss-seidel") {
    IterSolveConfig cfg;
    cfg.tolerance = opts.target_residual;
    auto result = std::make_shared<IterResult>();
    const bool jac = method == "jacobi";
    cell.run = [sys, cfg, result, jac] {
      *result = jac ? jacobi_solve(*sys, cfg) : gauss_seidel_solve(*sys, cfg);
    };
    cell.finish = [result, target = opts.target_residual](BenchRecord& rec) {
      rec.relative_residual = result->relative_residual;
      rec.extra.emplace_back("iterations", std::to_string(result->iterations));
      rec.extra.emplace_back("target", format_double(target));
    };
  } else if (method == "plain-mc") {
    // c functional estimates with N walks each; runtime is expected to be
    // nearly size-independent (Table 2's flat Plain MC column)
    auto components =
        std::make_shared<std::vector<std::size_t>>(std::min(opts.components, m));
    for (std::size_t i = 0; i < components->size(); ++i) (*components)[i] = i;
    const double kill = 0.1;
    auto cfg = std::make_shared<WalkConfig>(
        WalkConfig{kernel_from_operator(fp->h, Vector(m, 1.0), WalkMode::Forward,
                                        KillingProb{kill}),
                   opts.n_walks, opts.seed, 10000, opts.threads, 0});
    auto report = std::make_shared<EstimateReport>();
    cell.run = [fp, components, cfg, report] {
      *report = forward_estimate_components(*fp, *components, *cfg);
    };
    cell.finish = [sys, components, report, n_walks = opts.n_walks,
                   kill](BenchRecord& rec) {
      // the error column compares the estimated components against an
      // (untimed) elimination reference, since a functional estimator has
      // no full-solution residual
      const Vector x_ref = gauss_solve(sys->a, sys->b);
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < components->size(); ++i) {
        const double d = report->estimate[i] - x_ref[(*components)[i]];
        num += d * d;
        den += x_ref[(*components)[i]] * x_ref[(*components)[i]];
      }
      rec.relative_residual = std::sqrt(num / (den > 0.0 ? den : 1.0));
      rec.extra.emplace_back("N", std::to_string(n_walks));
      rec.extra.emplace_back("c", std::to_string(components->size()));
      rec.extra.emplace_back("kill", format_double(kill));
      rec.extra.emplace_back("residual_kind", "component_error");
    };
  } else if (method == "exact-seq-mc" || method == "sampled-seq-mc") {
    auto cfg = std::make_shared<BoostConfig>();
    cfg->inner = WalkConfig{kernel_from_operator(fp->h, fp->c, WalkMode::Adjoint,
                                                 WeightCutoff{}),
                            opts.n_walks, opts.seed, 10000, opts.threads, 0};
    cfg->rounds = opts.rounds;
    cfg->target_residual = opts.target_residual;
    if (method == "sampled-seq-mc") {
      cfg->variant = BoostConfig::Variant::Sampled;
      cfg->sample_cols = std::min(opts.sample_cols, m);
      cell.rec.extra.emplace_back("sample_cols",
                                  std::to_string(cfg->sample_cols));
    }
    auto result = std::make_shared<BoostResult>();
    cell.run = [fp, cfg, result] { *result = boost_solve(*fp, *cfg); };
    cell.finish = [sys, result, n_walks = opts.n_walks](BenchRecord& rec) {
      rec.relative_residual = relative_system_residual(*sys, result->x);
      rec.extra.emplace_back("N", std::to_string(n_walks));
      rec.extra.emplace_back("rounds", std::to_string(result->rounds_used));
      rec.extra.emplace_back("converged", result->converged ? "1" : "0");
      if (result->kappa_estimate) {
        rec.extra.emplace_back("kappa", format_double(*result->kappa_estimate));
      }
    };
  } else {
    throw config_error("unknown method '" + method + "'");
  }

  return cell;
}

}  // namespace

std::string extra_to_string(const Extra& extra) {
  std::string s;
  for (const auto& [k, v] : extra) {
    if (!s.empty()) s += ';';
    s += k;
    s += '=';
    s += v;
  }
  return s;
}

const std::vector<std::string>& scaling_method_names() {
  static const std::vector<std::string> names = {
      "jacobi", "gauss-seidel", "plain-mc", "exact-seq-mc", "sampled-seq-mc"};
  return names;
}

std::vector<BenchRecord> run_scaling(const ScalingOptions& opts) {
  if (opts.sizes.empty()) throw config_error("scaling needs at least one size");
  if (opts.methods.empty()) throw config_error("scaling needs at least one method");
  if (opts.repeats == 0) throw config_error("repeats must be positive");
  const auto& known = scaling_method_names();
  for (const std::string& m : opts.methods) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw config_error("unknown method '" + m + "'");
    }
  }

  std::vector<ScalingCell> cells;
  cells.reserve(opts.sizes.size() * opts.methods.size());
  for (std::size_t m : opts.sizes) {
    // shared untimed setup: instance, fixed-point form, spectral estimate
    auto sys = std::make_shared<const LinearSystem>(
        gen_diag_dominant(m, opts.off_diag_scale, opts.seed));
    FixedPointSystem fp = build_fixed_point(*sys);
    auto fp_ptr = std::make_shared<const FixedPointSystem>(
        fp.with_rho(estimate_spectral_radius(fp.h).value));
    for (const std::string& method : opts.methods) {
      cells.push_back(make_scaling_cell(sys, fp_ptr, m, method, opts));
    }
  }

  std::vector<BenchRecord> records;
  records.reserve(cells.size());
  for (ScalingCell& cell : cells) {
    cell.run();  // warmup, untimed
    for (std::size_t r = 0; r < opts.repeats; ++r) {
      cell.times.push_back(timed(cell.run));
    }
    cell.rec.runtime_seconds = median(std::move(cell.times));
    cell.finish(cell.rec);
    records.push_back(std::move(cell.rec));
  }
  return records;
}

void write_scaling_csv(const std::string& path,
                       const std::vector<BenchRecord>& records) {
  std::ofstream out = open_csv(path);
  out << "method,m,runtime_seconds,relative_residual,extra\n";
  for (const BenchRecord& r : records) {
    out << r.method << ',' << r.m << ',' << format_double(r.runtime_seconds)
        << ',' << format_double(r.relative_residual) << ','
        << extra_to_string(r.extra) << '\n';
  }
  finish_csv(out, path);
}

ConvergenceStudy run_convergence(const ConvergenceOptions& opts) {
  if (opts.walk_grid.empty()) throw config_error("convergence walk grid is empty");
  for (std::size_t walks : opts.walk_grid) {
    if (walks == 0) throw config_error("walk grid entries must be positive");
  }
  if (opts.m < 2) throw config_error("convergence needs m >= 2");
  if (!(opts.start_mixture >= 0.0) || !(opts.start_mixture <= 1.0)) {
    throw config_error("start_mixture must lie in [0, 1]");
  }

  const HaltonDenseProblem prob = gen_halton_dense(opts.m, opts.seed);
  const std::size_t m = opts.m;
  const ChainKernel base = kernel_from_operator(prob.fp.h, Vector(m, 1.0),
                                                WalkMode::Forward, FixedLength{0});

  ConvergenceStudy study;
  Vector unit(m, 0.0);
  Vector start(m);
  for (std::size_t walks : opts.walk_grid) {
    Vector x_hat(m);
    const double seconds = timed([&] {
      for (std::size_t i = 0; i < m; ++i) {
        const double uniform_share = opts.start_mixture / static_cast<double>(m);
        for (std::size_t j = 0; j < m; ++j) start[j] = uniform_share;
        start[i] += 1.0 - opts.start_mixture;
        unit[i] = 1.0;
        WalkConfig cfg{base.with_initial(start), walks, opts.seed, 16,
                       opts.threads, static_cast<std::uint32_t>(i)};
        x_hat[i] = forward_estimate(prob.fp, unit, cfg).estimate[0];
        unit[i] = 0.0;
      }
    });
    study.records.push_back(
        {walks, norm2(subtract(prob.x_true, x_hat)), seconds, opts.seed});
  }

  const double anchor_error = study.records.front().l2_error;
  const double anchor_walks = static_cast<double>(study.records.front().n_walks);
  for (const ConvergenceRecord& r : study.records) {
    study.reference.emplace_back(
        r.n_walks,
        anchor_error * std::sqrt(anchor_walks / static_cast<double>(r.n_walks)));
  }
  return study;
}

void write_convergence_csv(const std::string& path,
                           const std::vector<ConvergenceRecord>& records) {
  std::ofstream out = open_csv(path);
  out << "n_walks,l2_error,runtime_seconds,seed\n";
  for (const ConvergenceRecord& r : records) {
    out << r.n_walks << ',' << format_double(r.l2_error) << ','
        << format_double(r.runtime_seconds) << ',' << r.seed << '\n';
  }
  finish_csv(out, path);
}

void write_reference_csv(
    const std::string& path,
    const std::vector<std::pair<std::size_t, double>>& reference) {
  std::ofstream out = open_csv(path);
  out << "n_walks,reference_error\n";
  for (const auto& [walks, error] : reference) {
    out << walks << ',' << format_double(error) << '\n';
  }
  finish_csv(out, path);
}

SolveOutcome solve_system(const LinearSystem& sys, const SolveOptions& opts) {
  SolveOutcome out;
  out.details.emplace_back("method", opts.method);
  out.details.emplace_back("m", std::to_string(sys.a.rows()));

  auto fixed_point = [&] {
    FixedPointSystem fp = build_fixed_point(sys);
    return fp.with_rho(estimate_spectral_radius(fp.h).value);
  };

  if (opts.method == "gauss") {
    out.x = gauss_solve(sys.a, sys.b);
  } else if (opts.method == "jacobi" || opts.method == "gauss-seidel") {
    IterSolveConfig cfg;
    cfg.tolerance = opts.target_residual;
    IterResult r = opts.method == "jacobi" ? jacobi_solve(sys, cfg)
                                           : gauss_seidel_solve(sys, cfg);
    out.details.emplace_back("iterations", std::to_string(r.iterations));
    out.details.emplace_back("converged", r.converged ? "yes" : "no");
    if (!r.converged) {
      out.warnings.push_back("did not reach the residual target " +
                             format_double(opts.target_residual));
    }
    out.x = std::move(r.x);
  } else if (opts.method == "neumann") {
    out.x = neumann_partial_sum(fixed_point(), opts.neumann_terms);
    out.details.emplace_back("terms", std::to_string(opts.neumann_terms));
  } else if (opts.method == "adjoint-mc") {
    const FixedPointSystem fp = fixed_point();
    WalkConfig cfg{kernel_from_operator(fp.h, fp.c, WalkMode::Adjoint,
                                        WeightCutoff{}),
                   opts.n_walks, opts.seed, 10000, opts.threads, 0};
    EstimateReport report = adjoint_estimate(fp, cfg);
    out.details.emplace_back("walks", std::to_string(report.n_walks));
    out.details.emplace_back("mean_walk_length",
                             format_double(report.mean_walk_length));
    out.warnings = std::move(report.warnings);
    out.x = std::move(report.estimate);
  } else if (opts.method == "exact-seq-mc" || opts.method == "sampled-seq-mc") {
    const FixedPointSystem fp = fixed_point();
    BoostConfig cfg;
    cfg.inner = WalkConfig{kernel_from_operator(fp.h, fp.c, WalkMode::Adjoint,
                                                WeightCutoff{}),
                           opts.n_walks, opts.seed, 10000, opts.threads, 0};
    cfg.rounds = opts.rounds;
    cfg.target_residual = opts.target_residual;
    if (opts.method == "sampled-seq-mc") {
      cfg.variant = BoostConfig::Variant::Sampled;
      cfg.sample_cols = std::min(opts.sample_cols, fp.size());
    }
    BoostResult result = boost_solve(fp, cfg);
    out.details.emplace_back("rounds", std::to_string(result.rounds_used));
    out.details.emplace_back("walks", std::to_string(result.total_walks));
    out.details.emplace_back("converged", result.converged ? "yes" : "no");
    if (result.kappa_estimate) {
      out.details.emplace_back("kappa", format_double(*result.kappa_estimate));
    }
    out.warnings = std::move(result.warnings);
    out.x = std::move(result.x);
  } else {
    throw config_error("unknown method '" + opts.method +
                       "' (expected gauss, jacobi, gauss-seidel, neumann, "
                       "adjoint-mc, exact-seq-mc, sampled-seq-mc)");
  }

  const double bn = norm2(sys.b);
  out.relative_residual = norm2(residual(sys, out.x)) / (bn > 0.0 ? bn : 1.0);
  return out;
}

std::string format_solve_report(const SolveOutcome& outcome) {
  std::string text;
  for (const auto& [k, v] : outcome.details) {
    text += k + ": " + v + "\n";
  }
  text += "relative_residual: " + format_double(outcome.relative_residual) + "\n";
  for (const std::string& w : outcome.warnings) {
    text += "warning: " + w + "\n";
  }
  return text;
}

FredholmOutcome run_fredholm(const FredholmOptions& opts) {
  const Kernel1D kernel = catalog_kernel(opts.kernel, opts.param);
  const auto g = [](double) { return 1.0; };  // unit source term

  FredholmOutcome out;
  const SubStochasticWalk walk = default_subwalk(kernel, opts.survival, opts.bins);
  FredholmConfig cfg;
  cfg.n_walks = opts.n_walks;
  cfg.seed = opts.seed;
  cfg.threads = opts.threads;
  out.report = fredholm_estimate(kernel, g, walk, opts.x0, cfg);
  out.estimate = out.report.estimate[0];
  out.std_error = std::sqrt(out.report.sample_variance[0] /
                            static_cast<double>(out.report.n_walks));

  // deterministic cross-check at the node nearest x0
  const LinearSystem nys = nystrom_discretize(kernel, g, opts.nodes);
  const Vector f = gauss_solve(nys.a, nys.b);
  const Vector xs = nystrom_nodes(kernel, opts.nodes);
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (std::abs(xs[i] - opts.x0) < std::abs(xs[nearest] - opts.x0)) nearest = i;
  }
  out.nystrom = f[nearest];
  out.gap = std::abs(out.estimate - out.nystrom);
  return out;
}

void write_fredholm_csv(const std::string& path, const FredholmOptions& opts,
                        const FredholmOutcome& outcome) {
  std::ofstream out = open_csv(path);
  out << "kernel,param,x0,n_walks,seed,estimate,std_error,nystrom,gap,"
         "mean_walk_length\n";
  out << opts.kernel << ',' << format_double(opts.param) << ','
      << format_double(opts.x0) << ',' << opts.n_walks << ',' << opts.seed << ','
      << format_double(outcome.estimate) << ','
      << format_double(outcome.std_error) << ','
      << format_double(outcome.nystrom) << ',' << format_double(outcome.gap)
      << ',' << format_double(outcome.report.mean_walk_length) << '\n';
  finish_csv(out, path);
}

}  // namespace mcsolve::bench
