#pragma once

#include <cstddef>
#include <optional>

#include "mcsolve/matrix.hpp"
#include "mcsolve/types.hpp"

namespace mcsolve {

/// Square system A x = b.
struct LinearSystem {
  Matrix a;
  Vector b;

  LinearSystem(Matrix a_in, Vector b_in);

  std::size_t size() const { return b.size(); }
};

/// Fixed-point form x = c + H x, the shape every stochastic routine here
/// consumes. `rho` optionally caches an estimate of the spectral radius of
/// |H|; routines that need a convergence gate compute it on demand when
/// absent.
struct FixedPointSystem {
  Matrix h;
  Vector c;
  std::optional<double> rho;

  FixedPointSystem(Matrix h_in, Vector c_in,
                   std::optional<double> rho_in = std::nullopt);

  std::size_t size() const { return c.size(); }

  FixedPointSystem with_rho(double value) const {
    return FixedPointSystem(h, c, value);
  }
};

/// Left preconditioner G used to pass from A x = b to x = Gb + (I - GA) x.
struct Preconditioner {
  enum class Kind { JacobiDiagonal, Custom };

  Kind kind = Kind::JacobiDiagonal;
  Matrix g;  // only for Custom

  /// G = D^{-1}, the inverse diagonal of A (errors on a zero diagonal).
  static Preconditioner jacobi() { return {}; }

  static Preconditioner custom(Matrix g_in) {
    Preconditioner p;
    p.kind = Kind::Custom;
    p.g = std::move(g_in);
    return p;
  }
};

/// Builds the fixed-point system c = Gb, H = I - GA. The iteration
/// x_{k+1} = c + H x_k converges to A^{-1} b whenever rho(H) < 1.
FixedPointSystem build_fixed_point(const LinearSystem& sys,
                                   const Preconditioner& pre = Preconditioner::jacobi());

/// Result of the power-iteration bound below.
struct SpectralEstimate {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Power-iteration estimate of rho(|M|). The absolute-value matrix governs
/// walk-weight growth, which is what the stochastic estimators and the
/// truncation-bias bounds actually depend on; it also upper-bounds rho(M).
SpectralEstimate estimate_spectral_radius(const Matrix& m,
                                          std::size_t max_iterations = 200,
                                          double tolerance = 1e-10);

/// Solvers warn (and proceed) when the estimated radius exceeds this gate.
inline constexpr double kSpectralRadiusGate = 0.999;

/// Partial Neumann sum x_L = sum_{l=0..L} H^l c, evaluated by L fused
/// multiply-adds: x_0 = c, x_{k+1} = c + H x_k.
Vector neumann_partial_sum(const FixedPointSystem& fp, std::size_t terms);

/// b - A x
Vector residual(const LinearSystem& sys, const Vector& x);

/// c + H x - x, the fixed-point defect.
Vector residual_fp(const FixedPointSystem& fp, const Vector& x);

}  // namespace mcsolve
