#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcsolve/fredholm.hpp"
#include "mcsolve/linear_system.hpp"
#include "mcsolve/types.hpp"
#include "mcsolve/walk.hpp"

namespace mcsolve::bench {

/// Key-value annotations serialized into one CSV cell as `k=v;k=v`. Keep
/// runtime measurements out of these: everything here must be reproducible
/// byte for byte from (flags, seed).
using Extra = std::vector<std::pair<std::string, std::string>>;

std::string extra_to_string(const Extra& extra);

// -- scaling study (Table 2 shape) -------------------------------------------

/// One cell of the runtime scaling study.
struct BenchRecord {
  std::string method;
  std::size_t m = 0;
  double runtime_seconds = 0.0;  ///< median over repeats, monotonic clock
  double relative_residual = 0.0;
  Extra extra;  ///< method parameters and the seed; no runtime values
};

/// The five benchmarked methods, in report order.
const std::vector<std::string>& scaling_method_names();

struct ScalingOptions {
  std::vector<std::size_t> sizes = {100, 200, 400, 800};
  std::vector<std::string> methods = scaling_method_names();
  std::uint64_t seed = 1;
  std::size_t repeats = 3;
  std::size_t n_walks = 1000;     ///< MC budget per estimate / round
  std::size_t rounds = 8;         ///< sequential-correction round budget
  std::size_t sample_cols = 32;   ///< sampled-seq-mc coordinates per round
  double target_residual = 1e-6;
  unsigned threads = 1;           ///< solver-internal; cells run one at a time
  double off_diag_scale = 0.55;   ///< problem-family knob (rho ~ 0.5)
  std::size_t components = 5;     ///< plain-mc: functionals per instance
};

/// Runs every (size, method) cell: generates the instance, solves it
/// `repeats` times, and records the median wall time. Deterministic
/// methods run to the residual target; MC methods run their configured
/// budgets and report the residual they achieved. Problem generation,
/// kernel construction, and the spectral-radius estimate happen outside
/// the timed region (they are shared setup, not solver work).
std::vector<BenchRecord> run_scaling(const ScalingOptions& opts);

/// Header `method,m,runtime_seconds,relative_residual,extra`.
void write_scaling_csv(const std::string& path,
                       const std::vector<BenchRecord>& records);

// -- convergence study (Table 3 shape) ----------------------------------------

struct ConvergenceRecord {
  std::size_t n_walks = 0;
  double l2_error = 0.0;  ///< ||x_true - x_hat||_2
  double runtime_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct ConvergenceOptions {
  std::size_t m = 1000;
  std::vector<std::size_t> walk_grid = {10, 25, 50, 100, 250, 500, 1000};
  std::uint64_t seed = 1;
  /// Probability mass of the start distribution spread uniformly over all
  /// states; the rest sits on the component being estimated. The uniform
  /// share is what gives the estimator its Monte Carlo noise.
  double start_mixture = 0.3;
  unsigned threads = 1;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRecord> records;
  /// M^{-1/2} reference curve anchored at the first grid point, for the
  /// companion file: (n_walks, reference_error) per grid value.
  std::vector<std::pair<std::size_t, double>> reference;
};

/// Estimates every component of the gen_halton_dense solution with M walks
/// of the forward estimator truncated at length 0 (zeroth partial sum), the
/// budget regime where truncation bias dominates: the error curve plateaus
/// near ||x - c||_2 instead of decaying like M^{-1/2}.
ConvergenceStudy run_convergence(const ConvergenceOptions& opts);

/// Header `n_walks,l2_error,runtime_seconds,seed`.
void write_convergence_csv(const std::string& path,
                           const std::vector<ConvergenceRecord>& records);

/// Header `n_walks,reference_error`.
void write_reference_csv(
    const std::string& path,
    const std::vector<std::pair<std::size_t, double>>& reference);

// -- single solves for the `solve` subcommand ---------------------------------

struct SolveOptions {
  std::string method = "gauss-seidel";
  double target_residual = 1e-6;
  std::size_t n_walks = 1000;
  std::size_t rounds = 20;
  std::size_t neumann_terms = 200;
  std::size_t sample_cols = 32;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct SolveOutcome {
  Vector x;
  double relative_residual = 0.0;  ///< on the original system, ||b-Ax||/||b||
  Extra details;                   ///< iterations / rounds / kappa / ...
  std::vector<std::string> warnings;
};

/// Methods: gauss, jacobi, gauss-seidel, neumann, adjoint-mc,
/// exact-seq-mc, sampled-seq-mc.
SolveOutcome solve_system(const LinearSystem& sys, const SolveOptions& opts);

/// report.txt body for a solve outcome: one `key: value` line per detail.
std::string format_solve_report(const SolveOutcome& outcome);

// -- fredholm subcommand -------------------------------------------------------

struct FredholmOptions {
  std::string kernel = "constant";
  double param = 0.5;
  double x0 = 0.3;
  std::size_t n_walks = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double survival = 0.9;     ///< default_subwalk per-step survival
  std::size_t bins = 128;    ///< default_subwalk row-sketch resolution
  std::size_t nodes = 201;   ///< Nystrom cross-check grid
};

struct FredholmOutcome {
  double estimate = 0.0;
  double std_error = 0.0;  ///< sqrt(sample_variance / n_walks)
  double nystrom = 0.0;    ///< deterministic value at the node nearest x0
  double gap = 0.0;        ///< |estimate - nystrom|
  EstimateReport report;
};

/// Runs fredholm_estimate with the unit source term g = 1 and the Nystrom
/// cross-check on the same kernel.
FredholmOutcome run_fredholm(const FredholmOptions& opts);

/// One-row CSV, header
/// `kernel,param,x0,n_walks,seed,estimate,std_error,nystrom,gap,mean_walk_length`.
void write_fredholm_csv(const std::string& path, const FredholmOptions& opts,
                        const FredholmOutcome& outcome);

}  // namespace mcsolve::bench
