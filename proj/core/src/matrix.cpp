#include "mcsolve/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "hugepage_hint.hpp"

namespace mcsolve {

namespace {

void check_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw config_error("matrix dimensions must be positive");
  }
}

}  // namespace

Matrix Matrix::dense(std::size_t rows, std::size_t cols, Vector values) {
  check_dims(rows, cols);
  if (values.size() != rows * cols) {
    throw config_error("dense matrix needs rows*cols values, got " +
                       std::to_string(values.size()));
  }
  ensure_finite(values, "matrix entries");
  auto p = std::make_shared<Payload>();
  p->kind = Storage::Dense;
  p->rows = rows;
  p->cols = cols;
  p->values = std::move(values);
  detail::hint_huge_pages(p->values.data(), p->values.size() * sizeof(double));
  return Matrix(std::move(p));
}

Matrix Matrix::dense_zero(std::size_t rows, std::size_t cols) {
  return dense(rows, cols, Vector(rows * cols, 0.0));
}

Matrix Matrix::identity(std::size_t n) {
  Vector v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return dense(n, n, std::move(v));
}

Matrix Matrix::sparse(std::size_t rows, std::size_t cols,
                      std::vector<std::size_t> row_offsets,
                      std::vector<std::size_t> col_indices, Vector values) {
  check_dims(rows, cols);
  if (row_offsets.size() != rows + 1 || row_offsets.front() != 0 ||
      row_offsets.back() != values.size() ||
      col_indices.size() != values.size()) {
    throw config_error("inconsistent CSR arrays");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (row_offsets[i] > row_offsets[i + 1]) {
      throw config_error("CSR row offsets must be non-decreasing");
    }
    for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      if (col_indices[k] >= cols) {
        throw config_error("CSR column index out of range");
      }
      if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1]) {
        throw config_error("CSR column indices must be strictly increasing per row");
      }
    }
  }
  ensure_finite(values, "matrix entries");
  auto p = std::make_shared<Payload>();
  p->kind = Storage::SparseCsr;
  p->rows = rows;
  p->cols = cols;
  p->values = std::move(values);
  p->row_offsets = std::move(row_offsets);
  p->col_indices = std::move(col_indices);
  return Matrix(std::move(p));
}

Matrix Matrix::sparse_from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> entries) {
  check_dims(rows, cols);
  for (const Triplet& t : entries) {
    if (t.row >= rows || t.col >= cols) {
      throw config_error("triplet index out of range");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> cols_out;
  Vector vals_out;
  cols_out.reserve(entries.size());
  vals_out.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size();) {
    std::size_t j = k;
    double sum = 0.0;
    while (j < entries.size() && entries[j].row == entries[k].row &&
           entries[j].col == entries[k].col) {
      sum += entries[j].value;
      ++j;
    }
    cols_out.push_back(entries[k].col);
    vals_out.push_back(sum);
    offsets[entries[k].row + 1] += 1;
    k = j;
  }
  for (std::size_t i = 0; i < rows; ++i) offsets[i + 1] += offsets[i];
  return sparse(rows, cols, std::move(offsets), std::move(cols_out),
                std::move(vals_out));
}

std::size_t Matrix::stored_entries() const {
  if (!payload_) return 0;
  return payload_->values.size();
}

double Matrix::at(std::size_t i, std::size_t j) const {
  const Payload& p = *payload_;
  if (i >= p.rows || j >= p.cols) {
    throw config_error("matrix index out of range");
  }
  if (p.kind == Storage::Dense) {
    return p.values[i * p.cols + j];
  }
  auto begin = p.col_indices.begin() + static_cast<std::ptrdiff_t>(p.row_offsets[i]);
  auto end = p.col_indices.begin() + static_cast<std::ptrdiff_t>(p.row_offsets[i + 1]);
  auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return p.values[static_cast<std::size_t>(it - p.col_indices.begin())];
}

Matrix Matrix::transposed() const {
  const Payload& p = *payload_;
  if (p.kind == Storage::Dense) {
    Vector v(p.rows * p.cols);
    for (std::size_t i = 0; i < p.rows; ++i) {
      for (std::size_t j = 0; j < p.cols; ++j) {
        v[j * p.rows + i] = p.values[i * p.cols + j];
      }
    }
    return dense(p.cols, p.rows, std::move(v));
  }
  std::vector<Triplet> entries;
  entries.reserve(p.values.size());
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
      entries.push_back({p.col_indices[k], i, p.values[k]});
    }
  }
  return sparse_from_triplets(p.cols, p.rows, std::move(entries));
}

Matrix Matrix::to_dense() const {
  const Payload& p = *payload_;
  if (p.kind == Storage::Dense) return *this;
  Vector v(p.rows * p.cols, 0.0);
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
      v[i * p.cols + p.col_indices[k]] = p.values[k];
    }
  }
  return dense(p.rows, p.cols, std::move(v));
}

Matrix Matrix::to_sparse(double drop_tol) const {
  const Payload& p = *payload_;
  std::vector<Triplet> entries;
  for (std::size_t i = 0; i < p.rows; ++i) {
    for_each_in_row(i, [&](std::size_t j, double v) {
      if (std::abs(v) > drop_tol) entries.push_back({i, j, v});
    });
  }
  return sparse_from_triplets(p.rows, p.cols, std::move(entries));
}

const double* Matrix::dense_data() const {
  if (!payload_ || payload_->kind != Storage::Dense) {
    throw config_error("dense_data() requires dense storage");
  }
  return payload_->values.data();
}

Vector matvec(const Matrix& m, const Vector& x) {
  ensure_size(x, m.cols(), "matvec input");
  Vector y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    m.for_each_in_row(i, [&](std::size_t j, double v) { s += v * x[j]; });
    y[i] = s;
  }
  return y;
}

Vector abs_matvec(const Matrix& m, const Vector& x) {
  ensure_size(x, m.cols(), "abs_matvec input");
  Vector y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    m.for_each_in_row(i, [&](std::size_t j, double v) { s += std::abs(v) * x[j]; });
    y[i] = s;
  }
  return y;
}

double max_abs_row_sum(const Matrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    m.for_each_in_row(i, [&](std::size_t, double v) { s += std::abs(v); });
    best = std::max(best, s);
  }
  return best;
}

}  // namespace mcsolve
