#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "doctest.h"
#include "mcsolve/io.hpp"
#include "mcsolve/linear_system.hpp"
#include "mcsolve/matrix.hpp"
#include "test_support.hpp"

// End-to-end checks of the installed command-line surface: each case shells
// out to the real binary (path injected by the build) and inspects exit
// codes and the files it leaves behind.

namespace {

using namespace mcsolve;

int run_cli(const std::string& args, const std::string& log_path) {
  const std::string cmd =
      std::string(MCSOLVE_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("generate and solve round-trip through the filesystem") {
  test_support::ScratchDir dir;
  const std::string prob = dir.file("prob");
  const std::string sol = dir.file("sol");

  CHECK(run_cli("generate --kind diag-dominant --m 24 --seed 11 --out " + prob,
                dir.file("generate.log")) == 0);
  const Matrix a = read_matrix_market(prob + "/matrix.mtx");
  const Vector b = read_vector_csv(prob + "/rhs.csv");
  REQUIRE(a.rows() == 24);
  REQUIRE(b.size() == 24);

  CHECK(run_cli("solve --matrix " + prob + "/matrix.mtx --rhs " + prob +
                    "/rhs.csv --method gauss --out " + sol,
                dir.file("solve.log")) == 0);
  const Vector x = read_vector_csv(sol + "/solution.csv");
  CHECK(norm_inf(residual(LinearSystem(a, b), x)) < 1e-8 * norm_inf(b));

  const std::string report = test_support::read_file(sol + "/report.txt");
  CHECK(report.find("method: gauss\n") != std::string::npos);
  CHECK(report.find("relative_residual: ") != std::string::npos);
}

TEST_CASE("halton instances ship their exact solution") {
  test_support::ScratchDir dir;
  const std::string out = dir.file("halton");
  CHECK(run_cli("generate --kind halton --m 16 --seed 3 --out " + out,
                dir.file("generate.log")) == 0);

  const Matrix a = read_matrix_market(out + "/matrix.mtx");
  const Vector b = read_vector_csv(out + "/rhs.csv");
  const Vector x_true = read_vector_csv(out + "/x_true.csv");
  CHECK(norm_inf(residual(LinearSystem(a, b), x_true)) < 1e-10);
}

TEST_CASE("configuration mistakes exit with code 2") {
  test_support::ScratchDir dir;
  const std::string prob = dir.file("prob");
  REQUIRE(run_cli("generate --m 8 --seed 1 --out " + prob,
                  dir.file("generate.log")) == 0);

  CHECK(run_cli("generate --kind ring --out " + dir.file("ring"),
                dir.file("bad_kind.log")) == 2);
  CHECK(run_cli("solve --matrix " + prob + "/matrix.mtx --rhs " + prob +
                    "/rhs.csv --method cholesky --out " + dir.file("sol"),
                dir.file("bad_method.log")) == 2);
  CHECK(run_cli("solve --rhs " + prob + "/rhs.csv",  // missing --matrix
                dir.file("missing_flag.log")) == 2);
}

TEST_CASE("unreadable inputs exit with code 3") {
  test_support::ScratchDir dir;
  const std::string matrix = dir.file("broken.mtx");
  test_support::write_file(matrix, "%%MatrixMarket matrix coordinate real "
                                   "general\n2 2 oops\n");
  const std::string rhs = dir.file("rhs.csv");
  test_support::write_file(rhs, "1\n1\n");

  CHECK(run_cli("solve --matrix " + matrix + " --rhs " + rhs + " --out " +
                    dir.file("sol"),
                dir.file("solve.log")) == 3);
}

TEST_CASE("solver breakdown exits with code 4") {
  test_support::ScratchDir dir;
  // Exactly singular: the second row is twice the first.
  write_matrix_market(dir.file("singular.mtx"),
                      Matrix::dense(2, 2, {1.0, 2.0, 2.0, 4.0}));
  test_support::write_file(dir.file("rhs.csv"), "1\n1\n");

  CHECK(run_cli("solve --matrix " + dir.file("singular.mtx") + " --rhs " +
                    dir.file("rhs.csv") + " --method gauss --out " +
                    dir.file("sol"),
                dir.file("solve.log")) == 4);
}

TEST_CASE("study subcommands write their tables") {
  test_support::ScratchDir dir;
  const std::string out = dir.file("study");

  CHECK(run_cli("scaling --sizes 15 --methods jacobi gauss-seidel --repeats 1 "
                "--walks 50 --out " +
                    out,
                dir.file("scaling.log")) == 0);
  const std::string scaling = test_support::read_file(out + "/scaling.csv");
  CHECK(scaling.find("method,m,runtime_seconds,relative_residual,extra") == 0);
  CHECK(scaling.find("jacobi,15,") != std::string::npos);
  CHECK(scaling.find("gauss-seidel,15,") != std::string::npos);

  CHECK(run_cli("convergence --size 40 --walk-grid 10 50 --seed 2 --out " + out,
                dir.file("convergence.log")) == 0);
  const std::string curve = test_support::read_file(out + "/convergence.csv");
  CHECK(curve.find("n_walks,l2_error,runtime_seconds,seed") == 0);
  const std::string reference =
      test_support::read_file(out + "/convergence_reference.csv");
  CHECK(reference.find("n_walks,reference_error") == 0);
}

TEST_CASE("fredholm runs are reproducible byte for byte") {
  test_support::ScratchDir dir;
  const std::string first = dir.file("first");
  const std::string second = dir.file("second");
  const std::string args =
      "fredholm --kernel constant --param 0.5 --walks 2000 --seed 9 "
      "--nodes 33 --out ";

  CHECK(run_cli(args + first, dir.file("first.log")) == 0);
  CHECK(run_cli(args + second, dir.file("second.log")) == 0);

  const std::string a = test_support::read_file(first + "/fredholm.csv");
  const std::string b = test_support::read_file(second + "/fredholm.csv");
  CHECK(a == b);
  CHECK(a.find("kernel,param,x0,n_walks,seed,estimate,std_error,nystrom,gap,"
               "mean_walk_length") == 0);
}
