#include "mcsolve/gaussian_elimination.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace mcsolve {

namespace {

double max_abs_entry(const Vector& values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

std::vector<Vector> gauss_solve_multi(const Matrix& a,
                                      const std::vector<Vector>& rhs) {
  if (a.rows() != a.cols()) {
    throw config_error("gauss_solve needs a square matrix");
  }
  const std::size_t n = a.rows();
  Matrix ad = a.to_dense();
  Vector lu(ad.dense_data(), ad.dense_data() + n * n);

  std::vector<Vector> x = rhs;
  for (Vector& col : x) ensure_size(col, n, "gauss_solve right-hand side");

  const double scale = max_abs_entry(lu);
  const double cutoff = kPivotTolerance * std::max(scale, 1.0);

  for (std::size_t k = 0; k < n; ++k) {
    // partial pivoting: largest magnitude in column k at or below row k
    std::size_t pivot = k;
    double best = std::abs(lu[k * n + k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      double v = std::abs(lu[i * n + k]);
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (best <= cutoff) {
      throw solver_error("matrix is singular to working precision (pivot " +
                         std::to_string(best) + " at column " +
                         std::to_string(k) + ")");
    }
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(lu[k * n + j], lu[pivot * n + j]);
      }
      for (Vector& col : x) std::swap(col[k], col[pivot]);
    }
    const double inv_pivot = 1.0 / lu[k * n + k];
    for (std::size_t i = k + 1; i < n; ++i) {
      double factor = lu[i * n + k] * inv_pivot;
      if (factor == 0.0) continue;
      lu[i * n + k] = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) {
        lu[i * n + j] -= factor * lu[k * n + j];
      }
      for (Vector& col : x) col[i] -= factor * col[k];
    }
  }

  // back substitution
  for (Vector& col : x) {
    for (std::size_t k = n; k-- > 0;) {
      double s = col[k];
      for (std::size_t j = k + 1; j < n; ++j) s -= lu[k * n + j] * col[j];
      col[k] = s / lu[k * n + k];
    }
  }
  return x;
}

Vector gauss_solve(const Matrix& a, const Vector& b) {
  return gauss_solve_multi(a, {b}).front();
}

std::size_t dense_rank(const Matrix& m, double tolerance) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Matrix md = m.to_dense();
  Vector w(md.dense_data(), md.dense_data() + rows * cols);

  const double cutoff = tolerance * std::max(max_abs_entry(w), 1.0);
  std::size_t rank = 0;
  for (std::size_t col = 0; col < cols && rank < rows; ++col) {
    std::size_t pivot = rank;
    double best = std::abs(w[rank * cols + col]);
    for (std::size_t i = rank + 1; i < rows; ++i) {
      double v = std::abs(w[i * cols + col]);
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (best <= cutoff) continue;
    if (pivot != rank) {
      for (std::size_t j = 0; j < cols; ++j) {
        std::swap(w[rank * cols + j], w[pivot * cols + j]);
      }
    }
    const double inv_pivot = 1.0 / w[rank * cols + col];
    for (std::size_t i = rank + 1; i < rows; ++i) {
      double factor = w[i * cols + col] * inv_pivot;
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < cols; ++j) {
        w[i * cols + j] -= factor * w[rank * cols + j];
      }
    }
    ++rank;
  }
  return rank;
}

}  // namespace mcsolve
