#include "mcsolve/problems.hpp"

#include <cmath>

#include "mcsolve/rng.hpp"

namespace mcsolve {

LinearSystem gen_diag_dominant(std::size_t m, double off_diag_scale,
                               std::uint64_t seed) {
  if (m < 2) throw config_error("problem size must be at least 2");
  if (!(off_diag_scale > 0.0) || off_diag_scale >= 1.0) {
    throw config_error("off_diag_scale must lie in (0, 1) for dominance");
  }
  RandomStream stream(seed, kDomainProblem);

  Vector values(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double abs_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      double u = 2.0 * stream.uniform(i * m + j, 0) - 1.0;  // U[-1, 1]
      double v = off_diag_scale * u;
      values[i * m + j] = v;
      abs_sum += std::abs(v);
    }
    // Row sum of the Jacobi |H| becomes off_diag_scale / 1.1 exactly.
    values[i * m + i] = (abs_sum / off_diag_scale) * 1.1;
  }

  Vector b(m);
  for (std::size_t i = 0; i < m; ++i) b[i] = stream.uniform(i, 1);

  return LinearSystem(Matrix::dense(m, m, std::move(values)), std::move(b));
}

HaltonDenseProblem gen_halton_dense(std::size_t m, std::uint64_t seed) {
  if (m < 2) throw config_error("problem size must be at least 2");
  RandomStream stream(seed, kDomainProblem);

  Vector values(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      // 1-based indices in the defining formula
      values[i * m + j] =
          0.9 / static_cast<double>(m + (i + 1) + (j + 1));
    }
  }
  Matrix h = Matrix::dense(m, m, std::move(values));

  Vector x_true(m);
  for (std::size_t i = 0; i < m; ++i) x_true[i] = stream.uniform(i, 0);

  Vector hx = matvec(h, x_true);
  Vector c(m);
  for (std::size_t i = 0; i < m; ++i) c[i] = x_true[i] - hx[i];

  HaltonDenseProblem problem{FixedPointSystem(std::move(h), std::move(c)),
                             std::move(x_true)};
  return problem;
}

std::string ProblemSpec::describe() const {
  switch (kind) {
    case Kind::DiagDominant:
      return "diag-dominant(m=" + std::to_string(m) +
             ", scale=" + std::to_string(off_diag_scale) +
             ", seed=" + std::to_string(seed) + ")";
    case Kind::HaltonDense:
      return "halton-dense(m=" + std::to_string(m) +
             ", seed=" + std::to_string(seed) + ")";
    case Kind::Custom:
      return "custom(path=" + path + ")";
  }
  return "unknown";
}

}  // namespace mcsolve
