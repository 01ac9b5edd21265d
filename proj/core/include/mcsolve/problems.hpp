#pragma once

#include <cstdint>
#include <string>

#include "mcsolve/linear_system.hpp"

namespace mcsolve {

/// Dense strictly diagonally dominant test system. Off-diagonal entries
/// are uniform on [-off_diag_scale, off_diag_scale]; each diagonal entry
/// is sized so that every row of the Jacobi iteration matrix |H| sums to
/// off_diag_scale / 1.1, which therefore is (to rounding) the spectral
/// radius seen by the stochastic solvers. The right-hand side is uniform
/// on [0, 1]. Fully determined by (m, off_diag_scale, seed).
LinearSystem gen_diag_dominant(std::size_t m, double off_diag_scale,
                               std::uint64_t seed);

/// Dense fixed-point benchmark x = c + Hx with H_ij = 0.9 / (m + i + j)
/// (indices 1-based), a smooth nonsymmetric kernel whose row sums stay
/// well below 1. The solution is drawn uniform on [0,1] and c is formed
/// as x - Hx, so the exact answer ships with the instance.
struct HaltonDenseProblem {
  FixedPointSystem fp;
  Vector x_true;
};
HaltonDenseProblem gen_halton_dense(std::size_t m, std::uint64_t seed);

/// Generator selector used by the command-line tool and benchmark records.
/// Custom identifies a system read from disk (Matrix Market plus a CSV
/// right-hand side) rather than one of the synthetic generators.
struct ProblemSpec {
  enum class Kind { DiagDominant, HaltonDense, Custom };

  Kind kind = Kind::DiagDominant;
  std::size_t m = 100;
  double off_diag_scale = 0.5;  // DiagDominant only
  std::uint64_t seed = 1;
  std::string path;  // Custom only: matrix file the system was read from

  std::string describe() const;
};

}  // namespace mcsolve
