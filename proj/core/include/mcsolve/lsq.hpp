#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "mcsolve/matrix.hpp"
#include "mcsolve/stationary.hpp"
#include "mcsolve/types.hpp"
#include "mcsolve/walk.hpp"

namespace mcsolve {

/// Overdetermined weighted least squares: minimize (f - Lx)^T Omega (f - Lx)
/// with diagonal Omega = diag(weights). The design must have more rows than
/// columns and independent columns; independence is asserted by an
/// elimination rank check on small instances (best-effort above
/// kRankCheckLimit entries).
struct WlsProblem {
  Matrix design;    // Q x N, Q > N
  Vector obs;       // length Q
  Vector weights;   // length Q, strictly positive

  WlsProblem(Matrix design_in, Vector obs_in, Vector weights_in);

  std::size_t rows() const { return obs.size(); }
  std::size_t params() const { return design.cols(); }
};

/// Entry-count ceiling below which the constructor runs the full rank check.
inline constexpr std::size_t kRankCheckLimit = 20000;

// -- pluggable inner solver ----------------------------------------------

/// Dense Gaussian elimination on the assembled normal equations.
struct DirectOracleInner {};

/// Gauss-Seidel sweeps on the assembled normal equations.
struct GaussSeidelInner {
  IterSolveConfig config;
};

/// Monte Carlo boosting on the Jacobi fixed-point form of the assembled
/// normal equations. (The kernel is built internally from that system, so
/// only scalar knobs appear here.)
struct BoostInner {
  std::size_t inner_walks = 5000;
  std::uint64_t seed = 0;
  std::size_t rounds = 30;
  double target_residual = 1e-8;
  Termination termination = WeightCutoff{};
  unsigned threads = 1;
};

using InnerSolver = std::variant<DirectOracleInner, GaussSeidelInner, BoostInner>;

/// Weighted least squares via the explicit normal equations
/// (L^T Omega L) x = L^T Omega f, solved by the selected inner solver.
/// (Normal-equation conditioning is squared relative to L; acceptable at
/// this library's problem sizes, and required by the MC inner solvers,
/// which consume square systems.)
Vector wls_solve(const WlsProblem& p, const InnerSolver& inner = DirectOracleInner{});

// -- IRLS -------------------------------------------------------------------

struct IrlsConfig {
  /// Maps the residual vector f - Lx to new weights (clamped afterwards).
  std::function<Vector(const Vector&)> weight_update;
  std::size_t max_outer = 50;
  double outer_tol = 1e-8;  ///< on the relative change of x between iterations
  InnerSolver inner = DirectOracleInner{};
  double weight_floor = 1e-8;
  double weight_cap = 1e8;
};

struct IrlsIteration {
  Vector x;
  Vector weights;
  double objective;  ///< (f - Lx)^T Omega (f - Lx) at this iteration
};

struct IrlsResult {
  Vector x;
  std::vector<IrlsIteration> trace;
  bool converged = false;
  std::size_t iterations = 0;  ///< reweighted solves after the initial one
};

/// Iteratively reweighted least squares: alternates wls_solve with
/// weight recomputation until x stabilizes. Monotone objective decrease is
/// only guaranteed for constant weight updates. Inner-solver failures are
/// rethrown with the outer-iteration index attached.
IrlsResult irls_solve(const WlsProblem& p, const IrlsConfig& config);

// -- EM-style M-step ---------------------------------------------------------

/// The ridge-like M-step system
///   (tau^-2 diag(lambda_hat) + X^T diag(omega_hat) X) beta = rhs.
struct MStepProblem {
  Matrix x_design;    // Q x N
  Vector lambda_hat;  // length N, entrywise >= 0 (shrinkage diagonal)
  Vector omega_hat;   // length Q, entrywise >= 0 (precision diagonal)
  double tau = 1.0;   // > 0
  Vector rhs;         // length N

  MStepProblem(Matrix x_in, Vector lambda_in, Vector omega_in, double tau_in,
               Vector rhs_in);

  std::size_t params() const { return rhs.size(); }
};

/// Solves the M-step system with the selected inner solver. Iterative
/// inners fall back to the elimination oracle (with a diagnostic) when the
/// assembled system's Jacobi iteration is not a contraction.
Vector mstep_solve(const MStepProblem& p, const InnerSolver& inner = DirectOracleInner{});

// -- numerically stable partitioned M-step ------------------------------------

/// Partitioned form of the M-step for the regime where some weights blow
/// up: those rows migrate into a hard constraint block X_s beta = 1 and the
/// remaining system stays well-scaled. Solves
///   [ B_-s  X_s^T ] [beta]   [rhs_top       ]
///   [ X_s   0     ] [psi ] = [rhs_constraint]
/// with B_-s = prior_block + X_-s^T diag(lambda_minus_s_inv) X_-s via the
/// closed-form block inverse built on F = -(X_s B_-s^{-1} X_s^T)^{-1}.
struct StableMStepProblem {
  Matrix x_minus_s;           // rows staying in the penalized block (may be empty)
  Matrix x_s;                 // constraint rows (empty Matrix = unconstrained)
  Vector lambda_minus_s_inv;  // length = rows of x_minus_s, entrywise >= 0
  Matrix prior_block;         // N x N
  Vector rhs_top;             // length N
  Vector rhs_constraint;      // length = rows of x_s

  StableMStepProblem(Matrix x_minus_s_in, Matrix x_s_in,
                     Vector lambda_minus_s_inv_in, Matrix prior_block_in,
                     Vector rhs_top_in, Vector rhs_constraint_in);

  std::size_t params() const { return rhs_top.size(); }
  std::size_t constraints() const { return rhs_constraint.size(); }
};

struct StableMStepSolution {
  Vector beta;
  Vector psi;  ///< constraint multipliers (empty when unconstrained)
};

/// Solves the partitioned system. The constraint X_s beta = rhs_constraint
/// holds to elimination accuracy by construction; a singular constraint
/// Schur block X_s B^{-1} X_s^T is reported as a Solver error naming that
/// block.
StableMStepSolution stable_mstep_solve(const StableMStepProblem& p);

}  // namespace mcsolve
