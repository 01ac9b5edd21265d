#pragma once

#include <cstddef>

#include "mcsolve/matrix.hpp"
#include "mcsolve/types.hpp"

namespace mcsolve {

/// Pivots whose magnitude falls below `kPivotTolerance * max|entry|` are
/// treated as zero and reported as a Solver error (near-singular matrix).
inline constexpr double kPivotTolerance = 1e-12;

/// Solves A x = b by Gaussian elimination with partial pivoting. Dense
/// O(n^3); intended as the small-system workhorse and the deterministic
/// reference the stochastic solvers are measured against.
Vector gauss_solve(const Matrix& a, const Vector& b);

/// Same factorization applied to several right-hand sides at once.
std::vector<Vector> gauss_solve_multi(const Matrix& a,
                                      const std::vector<Vector>& rhs);

/// Numerical rank via row elimination with partial pivoting: the number of
/// pivots exceeding `tolerance * max|entry|`. Works for rectangular input.
std::size_t dense_rank(const Matrix& m, double tolerance = 1e-10);

}  // namespace mcsolve
