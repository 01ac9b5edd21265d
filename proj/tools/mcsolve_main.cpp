#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "benchlib.hpp"
#include "mcsolve/io.hpp"
#include "mcsolve/problems.hpp"

namespace {

using namespace mcsolve;
using namespace mcsolve::bench;

int category_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config:
      return 2;
    case ErrorCategory::Parse:
      return 3;
    case ErrorCategory::Solver:
      return 4;
  }
  return 1;
}

std::string join_path(const std::string& dir, const std::string& file) {
  if (dir.empty()) return file;
  return dir.back() == '/' ? dir + file : dir + "/" + file;
}

void write_text(const std::string& path, const std::string& body) {
  ensure_parent_directory(path);
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw config_error("cannot write " + path);
  std::fputs(body.c_str(), f);
  std::fclose(f);
}

int cmd_scaling(const ScalingOptions& opts, const std::string& out_dir) {
  const std::vector<BenchRecord> records = run_scaling(opts);
  const std::string path = join_path(out_dir, "scaling.csv");
  write_scaling_csv(path, records);
  for (const BenchRecord& r : records) {
    std::printf("%-14s m=%-5zu %10.6fs  residual %.3e\n", r.method.c_str(), r.m,
                r.runtime_seconds, r.relative_residual);
  }
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_convergence(const ConvergenceOptions& opts, const std::string& out_dir) {
  const ConvergenceStudy study = run_convergence(opts);
  const std::string curve = join_path(out_dir, "convergence.csv");
  const std::string reference = join_path(out_dir, "convergence_reference.csv");
  write_convergence_csv(curve, study.records);
  write_reference_csv(reference, study.reference);
  for (const ConvergenceRecord& r : study.records) {
    std::printf("M=%-6zu l2_error=%.6f  (%.3fs)\n", r.n_walks, r.l2_error,
                r.runtime_seconds);
  }
  std::printf("wrote %s and %s\n", curve.c_str(), reference.c_str());
  return 0;
}

int cmd_solve(const std::string& matrix_path, const std::string& rhs_path,
              const SolveOptions& opts, const std::string& out_dir) {
  const Matrix a = read_matrix_market(matrix_path);
  const Vector b = read_vector_csv(rhs_path);
  const SolveOutcome outcome = solve_system(LinearSystem(a, b), opts);

  const std::string solution = join_path(out_dir, "solution.csv");
  const std::string report = join_path(out_dir, "report.txt");
  write_vector_csv(solution, outcome.x);
  write_text(report, format_solve_report(outcome));
  std::fputs(format_solve_report(outcome).c_str(), stdout);
  std::printf("wrote %s and %s\n", solution.c_str(), report.c_str());
  return 0;
}

int cmd_fredholm(const FredholmOptions& opts, const std::string& out_dir) {
  const FredholmOutcome outcome = run_fredholm(opts);
  const std::string path = join_path(out_dir, "fredholm.csv");
  write_fredholm_csv(path, opts, outcome);
  std::printf("estimate  %.6f +- %.6f (one sigma)\n", outcome.estimate,
              outcome.std_error);
  std::printf("nystrom   %.6f   gap %.3e\n", outcome.nystrom, outcome.gap);
  for (const std::string& w : outcome.report.warnings) {
    std::printf("warning: %s\n", w.c_str());
  }
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_generate(const ProblemSpec& spec, const std::string& out_dir) {
  const std::string matrix = join_path(out_dir, "matrix.mtx");
  const std::string rhs = join_path(out_dir, "rhs.csv");
  if (spec.kind == ProblemSpec::Kind::Custom) {
    throw config_error("generate needs a synthetic kind, not a custom path");
  }
  if (spec.kind == ProblemSpec::Kind::DiagDominant) {
    const LinearSystem sys = gen_diag_dominant(spec.m, spec.off_diag_scale, spec.seed);
    write_matrix_market(matrix, sys.a);
    write_vector_csv(rhs, sys.b);
    std::printf("%s\nwrote %s and %s\n", spec.describe().c_str(), matrix.c_str(),
                rhs.c_str());
  } else {
    // exported as the equivalent linear system (I - H) x = c, with the
    // generator's exact solution alongside
    const HaltonDenseProblem prob = gen_halton_dense(spec.m, spec.seed);
    const std::size_t m = spec.m;
    Matrix hd = prob.fp.h.to_dense();
    Vector values(hd.dense_data(), hd.dense_data() + m * m);
    for (double& v : values) v = -v;
    for (std::size_t i = 0; i < m; ++i) values[i * m + i] += 1.0;
    const std::string truth = join_path(out_dir, "x_true.csv");
    write_matrix_market(matrix, Matrix::dense(m, m, std::move(values)));
    write_vector_csv(rhs, prob.fp.c);
    write_vector_csv(truth, prob.x_true);
    std::printf("%s\nwrote %s, %s and %s\n", spec.describe().c_str(),
                matrix.c_str(), rhs.c_str(), truth.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"random-walk linear solver toolkit: scaling and convergence "
               "studies, single solves, and Fredholm estimates"};
  app.require_subcommand(1);

  // scaling
  ScalingOptions scaling;
  std::string scaling_out = "bench-out";
  CLI::App* sc = app.add_subcommand(
      "scaling", "five-method runtime scaling study (Table 2 shape)");
  sc->add_option("--sizes", scaling.sizes, "matrix sizes m")
      ->capture_default_str();
  sc->add_option("--methods", scaling.methods,
                 "subset of jacobi,gauss-seidel,plain-mc,exact-seq-mc,sampled-seq-mc")
      ->capture_default_str();
  sc->add_option("--seed", scaling.seed, "instance seed")->capture_default_str();
  sc->add_option("--repeats", scaling.repeats, "timing repeats (median)")
      ->capture_default_str();
  sc->add_option("--walks", scaling.n_walks, "MC walk budget")
      ->capture_default_str();
  sc->add_option("--rounds", scaling.rounds, "sequential-correction rounds")
      ->capture_default_str();
  sc->add_option("--sample-cols", scaling.sample_cols,
                 "sampled-seq-mc coordinates per round")
      ->capture_default_str();
  sc->add_option("--target-residual", scaling.target_residual,
                 "relative-residual target")
      ->capture_default_str();
  sc->add_option("--threads", scaling.threads, "solver threads (0 = hardware)")
      ->capture_default_str();
  sc->add_option("--off-diag-scale", scaling.off_diag_scale,
                 "problem off-diagonal scale in (0,1)")
      ->capture_default_str();
  sc->add_option("--components", scaling.components,
                 "plain-mc functionals per instance")
      ->capture_default_str();
  sc->add_option("--out", scaling_out, "output directory")->capture_default_str();

  // convergence
  ConvergenceOptions convergence;
  std::string convergence_out = "bench-out";
  CLI::App* cv = app.add_subcommand(
      "convergence", "Monte Carlo error-vs-walks study (Table 3 shape)");
  cv->add_option("--size", convergence.m, "system size m")->capture_default_str();
  cv->add_option("--walk-grid", convergence.walk_grid, "walk counts M")
      ->capture_default_str();
  cv->add_option("--seed", convergence.seed, "instance and stream seed")
      ->capture_default_str();
  cv->add_option("--mixture", convergence.start_mixture,
                 "uniform share of the start distribution")
      ->capture_default_str();
  cv->add_option("--threads", convergence.threads, "solver threads")
      ->capture_default_str();
  cv->add_option("--out", convergence_out, "output directory")
      ->capture_default_str();

  // solve
  SolveOptions solve;
  std::string solve_matrix;
  std::string solve_rhs;
  std::string solve_out = "solve-out";
  CLI::App* sv = app.add_subcommand("solve",
                                    "solve one system from Matrix Market + CSV");
  sv->add_option("--matrix", solve_matrix, "Matrix Market file")->required();
  sv->add_option("--rhs", solve_rhs, "right-hand side CSV (one value per line)")
      ->required();
  sv->add_option("--method", solve.method,
                 "gauss|jacobi|gauss-seidel|neumann|adjoint-mc|exact-seq-mc|"
                 "sampled-seq-mc")
      ->capture_default_str();
  sv->add_option("--target-residual", solve.target_residual,
                 "relative-residual target")
      ->capture_default_str();
  sv->add_option("--walks", solve.n_walks, "MC walk budget")->capture_default_str();
  sv->add_option("--rounds", solve.rounds, "sequential-correction rounds")
      ->capture_default_str();
  sv->add_option("--terms", solve.neumann_terms, "neumann partial-sum terms")
      ->capture_default_str();
  sv->add_option("--sample-cols", solve.sample_cols,
                 "sampled-seq-mc coordinates per round")
      ->capture_default_str();
  sv->add_option("--seed", solve.seed, "stream seed")->capture_default_str();
  sv->add_option("--threads", solve.threads, "solver threads")
      ->capture_default_str();
  sv->add_option("--out", solve_out, "output directory")->capture_default_str();

  // fredholm
  FredholmOptions fredholm;
  std::string fredholm_out = "fredholm-out";
  CLI::App* fr = app.add_subcommand(
      "fredholm", "continuous-state walk estimate of an integral equation");
  fr->add_option("--kernel", fredholm.kernel, "constant|xy|gauss")
      ->capture_default_str();
  fr->add_option("--param", fredholm.param, "kernel coefficient")
      ->capture_default_str();
  fr->add_option("--x0", fredholm.x0, "evaluation point")->capture_default_str();
  fr->add_option("--walks", fredholm.n_walks, "walk count")->capture_default_str();
  fr->add_option("--seed", fredholm.seed, "stream seed")->capture_default_str();
  fr->add_option("--threads", fredholm.threads, "walker threads")
      ->capture_default_str();
  fr->add_option("--survival", fredholm.survival, "per-step survival probability")
      ->capture_default_str();
  fr->add_option("--bins", fredholm.bins, "transition-sketch resolution")
      ->capture_default_str();
  fr->add_option("--nodes", fredholm.nodes, "Nystrom cross-check nodes")
      ->capture_default_str();
  fr->add_option("--out", fredholm_out, "output directory")->capture_default_str();

  // generate
  ProblemSpec generate;
  std::string generate_kind = "diag-dominant";
  std::string generate_out = "problem-out";
  CLI::App* gn = app.add_subcommand("generate",
                                    "write a reproducible problem instance");
  gn->add_option("--kind", generate_kind, "diag-dominant|halton")
      ->capture_default_str();
  gn->add_option("--m", generate.m, "system size")->capture_default_str();
  gn->add_option("--seed", generate.seed, "instance seed")->capture_default_str();
  gn->add_option("--off-diag-scale", generate.off_diag_scale,
                 "diag-dominant off-diagonal scale in (0,1)")
      ->capture_default_str();
  gn->add_option("--out", generate_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;  // usage problems are configuration errors
  }

  try {
    if (sc->parsed()) return cmd_scaling(scaling, scaling_out);
    if (cv->parsed()) return cmd_convergence(convergence, convergence_out);
    if (sv->parsed()) return cmd_solve(solve_matrix, solve_rhs, solve, solve_out);
    if (fr->parsed()) return cmd_fredholm(fredholm, fredholm_out);
    if (gn->parsed()) {
      if (generate_kind == "diag-dominant") {
        generate.kind = ProblemSpec::Kind::DiagDominant;
      } else if (generate_kind == "halton") {
        generate.kind = ProblemSpec::Kind::HaltonDense;
      } else {
        throw mcsolve::config_error("unknown problem kind '" + generate_kind +
                                    "' (expected diag-dominant or halton)");
      }
      return cmd_generate(generate, generate_out);
    }
  } catch (const mcsolve::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return category_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
