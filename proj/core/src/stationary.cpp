#include "mcsolve/stationary.hpp"

#include <cmath>
#include <string>

namespace mcsolve {

namespace {

Vector inverse_diagonal(const Matrix& a) {
  Vector inv(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double d = a.at(i, i);
    if (d == 0.0) {
      throw solver_error("zero diagonal at row " + std::to_string(i));
    }
    inv[i] = 1.0 / d;
  }
  return inv;
}

double relative_residual_norm(const LinearSystem& sys, const Vector& x,
                              double b_norm) {
  double r = norm2(residual(sys, x));
  return b_norm > 0.0 ? r / b_norm : r;
}

/// Shared iteration driver; `sweep` advances x by one pass in place.
template <typename Sweep>
IterResult iterate(const LinearSystem& sys, const IterSolveConfig& config,
                   Sweep&& sweep) {
  const std::size_t n = sys.size();
  IterResult result;
  result.x = config.initial ? *config.initial : Vector(n, 0.0);
  ensure_size(result.x, n, "initial guess");

  const double b_norm = norm2(sys.b);
  double current = relative_residual_norm(sys, result.x, b_norm);
  const double initial = std::max(current, 1e-300);

  result.relative_residual = current;
  if (current <= config.tolerance) {
    result.converged = true;
    return result;
  }

  for (std::size_t k = 1; k <= config.max_iterations; ++k) {
    sweep(result.x);
    current = relative_residual_norm(sys, result.x, b_norm);
    result.iterations = k;
    result.relative_residual = current;
    result.residual_history.push_back(current);
    if (!std::isfinite(current) || current > kDivergenceFactor * initial) {
      throw solver_error("stationary iteration diverged after " +
                         std::to_string(k) + " sweeps (residual " +
                         std::to_string(current) + ")");
    }
    if (current <= config.tolerance) {
      result.converged = true;
      return result;
    }
  }
  return result;  // converged stays false
}

}  // namespace

IterResult jacobi_solve(const LinearSystem& sys, const IterSolveConfig& config) {
  const std::size_t n = sys.size();
  Vector inv_diag = inverse_diagonal(sys.a);
  Vector next(n);
  return iterate(sys, config, [&](Vector& x) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = sys.b[i];
      sys.a.for_each_in_row(i, [&](std::size_t j, double v) {
        if (j != i) s -= v * x[j];
      });
      next[i] = inv_diag[i] * s;
    }
    x.swap(next);
  });
}

IterResult gauss_seidel_solve(const LinearSystem& sys,
                              const IterSolveConfig& config) {
  const std::size_t n = sys.size();
  Vector inv_diag = inverse_diagonal(sys.a);
  return iterate(sys, config, [&](Vector& x) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = sys.b[i];
      sys.a.for_each_in_row(i, [&](std::size_t j, double v) {
        if (j != i) s -= v * x[j];  // x[j] already updated for j < i
      });
      x[i] = inv_diag[i] * s;
    }
  });
}

}  // namespace mcsolve
