#include "mcsolve/linear_system.hpp"

#include <cmath>
#include <string>

namespace mcsolve {

LinearSystem::LinearSystem(Matrix a_in, Vector b_in)
    : a(std::move(a_in)), b(std::move(b_in)) {
  if (a.rows() != a.cols()) {
    throw config_error("system matrix must be square");
  }
  ensure_size(b, a.rows(), "right-hand side");
  ensure_finite(b, "right-hand side");
}

FixedPointSystem::FixedPointSystem(Matrix h_in, Vector c_in,
                                   std::optional<double> rho_in)
    : h(std::move(h_in)), c(std::move(c_in)), rho(rho_in) {
  if (h.rows() != h.cols()) {
    throw config_error("fixed-point operator must be square");
  }
  ensure_size(c, h.rows(), "fixed-point constant");
  ensure_finite(c, "fixed-point constant");
  if (rho && (!std::isfinite(*rho) || *rho < 0.0)) {
    throw config_error("cached spectral radius must be finite and non-negative");
  }
}

FixedPointSystem build_fixed_point(const LinearSystem& sys,
                                   const Preconditioner& pre) {
  const std::size_t n = sys.size();

  if (pre.kind == Preconditioner::Kind::JacobiDiagonal) {
    // H = I - D^{-1} A has zero diagonal and rows -a_ij / a_ii.
    Vector inv_diag(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d = sys.a.at(i, i);
      if (d == 0.0) {
        throw solver_error("Jacobi preconditioner: zero diagonal at row " +
                           std::to_string(i));
      }
      inv_diag[i] = 1.0 / d;
    }
    Vector c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = inv_diag[i] * sys.b[i];

    if (sys.a.is_dense()) {
      Vector hv(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        sys.a.for_each_in_row(i, [&](std::size_t j, double v) {
          hv[i * n + j] = (i == j) ? 0.0 : -inv_diag[i] * v;
        });
      }
      return FixedPointSystem(Matrix::dense(n, n, std::move(hv)), std::move(c));
    }
    std::vector<Triplet> entries;
    entries.reserve(sys.a.stored_entries());
    for (std::size_t i = 0; i < n; ++i) {
      sys.a.for_each_in_row(i, [&](std::size_t j, double v) {
        if (i != j) entries.push_back({i, j, -inv_diag[i] * v});
      });
    }
    return FixedPointSystem(Matrix::sparse_from_triplets(n, n, std::move(entries)),
                            std::move(c));
  }

  // Custom G: H = I - G A, c = G b, both formed densely.
  if (pre.g.rows() != n || pre.g.cols() != n) {
    throw config_error("custom preconditioner shape mismatch");
  }
  Matrix ga_dense = pre.g.to_dense();
  Matrix a_dense = sys.a.to_dense();
  Vector hv(n * n, 0.0);
  const double* g = ga_dense.dense_data();
  const double* a = a_dense.dense_data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double gik = g[i * n + k];
      if (gik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        hv[i * n + j] -= gik * a[k * n + j];
      }
    }
    hv[i * n + i] += 1.0;
  }
  return FixedPointSystem(Matrix::dense(n, n, std::move(hv)),
                          matvec(pre.g, sys.b));
}

SpectralEstimate estimate_spectral_radius(const Matrix& m,
                                          std::size_t max_iterations,
                                          double tolerance) {
  if (m.rows() != m.cols()) {
    throw config_error("spectral radius needs a square matrix");
  }
  const std::size_t n = m.rows();

  // |M| is non-negative, so power iteration from a strictly positive start
  // converges to the Perron root; the Rayleigh-style estimate below is the
  // infinity-norm growth factor of the iterate.
  Vector v(n, 1.0 / static_cast<double>(n));
  double estimate = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    Vector w = abs_matvec(m, v);
    double norm = norm_inf(w);
    if (norm == 0.0) {
      return {0.0, true, it};  // nilpotent-like: |M| v vanished
    }
    double previous = estimate;
    estimate = norm / norm_inf(v);
    for (double& x : w) x /= norm;
    v = std::move(w);
    if (it > 1 && std::abs(estimate - previous) <= tolerance * std::max(1.0, estimate)) {
      return {estimate, true, it};
    }
  }
  return {estimate, false, max_iterations};
}

Vector neumann_partial_sum(const FixedPointSystem& fp, std::size_t terms) {
  Vector x = fp.c;
  for (std::size_t l = 0; l < terms; ++l) {
    Vector hx = matvec(fp.h, x);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = fp.c[i] + hx[i];
  }
  return x;
}

Vector residual(const LinearSystem& sys, const Vector& x) {
  ensure_size(x, sys.size(), "residual input");
  Vector ax = matvec(sys.a, x);
  Vector r(sys.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = sys.b[i] - ax[i];
  return r;
}

Vector residual_fp(const FixedPointSystem& fp, const Vector& x) {
  ensure_size(x, fp.size(), "residual input");
  Vector hx = matvec(fp.h, x);
  Vector r(fp.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = fp.c[i] + hx[i] - x[i];
  return r;
}

}  // namespace mcsolve
