#pragma once

#include <cstddef>
#include <optional>

#include "mcsolve/linear_system.hpp"
#include "mcsolve/types.hpp"

namespace mcsolve {

/// Options shared by the stationary iterations.
struct IterSolveConfig {
  double tolerance = 1e-6;            ///< on ||b - Ax|| / ||b||
  std::size_t max_iterations = 20000;
  std::optional<Vector> initial;      ///< default: zero vector
};

/// A sweep-based solve and what it took.
struct IterResult {
  Vector x;
  std::size_t iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
  Vector residual_history;  ///< relative residual after each sweep
};

/// Sweeps diverging past this factor times the starting residual abort
/// with a Solver error instead of spinning until max_iterations.
inline constexpr double kDivergenceFactor = 1e6;

/// Jacobi iteration x_{k+1} = D^{-1} (b - R x_k).
IterResult jacobi_solve(const LinearSystem& sys, const IterSolveConfig& config = {});

/// Forward Gauss-Seidel: in-place sweeps using already-updated entries.
IterResult gauss_seidel_solve(const LinearSystem& sys,
                              const IterSolveConfig& config = {});

}  // namespace mcsolve
