#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "mcsolve/types.hpp"

namespace mcsolve {

/// Coordinate-form entry used when assembling sparse matrices.
struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Immutable dense (row-major) or sparse (CSR) matrix.
///
/// The entry payload is held through a shared pointer, so copies are cheap
/// and two Matrix values can be tested for *structural identity* — whether
/// they view the same underlying storage — with shares_storage_with().
/// The boosting driver relies on this to reuse one operator across every
/// correction round instead of copying it.
class Matrix {
 public:
  enum class Storage { Dense, SparseCsr };

  Matrix() = default;

  /// Dense matrix from row-major values (size must be rows*cols).
  static Matrix dense(std::size_t rows, std::size_t cols, Vector values);

  /// Dense zero matrix.
  static Matrix dense_zero(std::size_t rows, std::size_t cols);

  /// Dense identity.
  static Matrix identity(std::size_t n);

  /// CSR matrix from raw arrays. `row_offsets` has rows+1 entries; column
  /// indices must be strictly increasing within each row.
  static Matrix sparse(std::size_t rows, std::size_t cols,
                       std::vector<std::size_t> row_offsets,
                       std::vector<std::size_t> col_indices, Vector values);

  /// CSR matrix assembled from coordinate entries; duplicates are summed.
  static Matrix sparse_from_triplets(std::size_t rows, std::size_t cols,
                                     std::vector<Triplet> entries);

  std::size_t rows() const { return payload_ ? payload_->rows : 0; }
  std::size_t cols() const { return payload_ ? payload_->cols : 0; }
  Storage storage() const { return payload_->kind; }
  bool is_dense() const { return payload_ && payload_->kind == Storage::Dense; }

  /// Number of explicitly stored entries (rows*cols for dense).
  std::size_t stored_entries() const;

  /// Entry lookup: O(1) dense, O(log row_nnz) sparse.
  double at(std::size_t i, std::size_t j) const;

  /// Visits the stored entries of row i in column order as f(col, value).
  template <typename F>
  void for_each_in_row(std::size_t i, F&& f) const {
    const Payload& p = *payload_;
    if (p.kind == Storage::Dense) {
      const double* row = p.values.data() + i * p.cols;
      for (std::size_t j = 0; j < p.cols; ++j) f(j, row[j]);
    } else {
      for (std::size_t k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
        f(p.col_indices[k], p.values[k]);
      }
    }
  }

  /// Transposed copy (same storage kind).
  Matrix transposed() const;

  /// Conversion helpers.
  Matrix to_dense() const;
  /// Drops entries with |value| <= drop_tol.
  Matrix to_sparse(double drop_tol = 0.0) const;

  /// Row-major data pointer; throws Config for sparse storage.
  const double* dense_data() const;

  /// True when both objects view the same entry payload.
  bool shares_storage_with(const Matrix& other) const {
    return payload_ && payload_ == other.payload_;
  }

  /// Stable identity token for the payload (null matrix -> nullptr).
  const void* storage_id() const { return payload_.get(); }

  bool empty() const { return !payload_; }

 private:
  struct Payload {
    Storage kind = Storage::Dense;
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vector values;                         // dense: row-major; sparse: nnz
    std::vector<std::size_t> row_offsets;  // sparse only, rows+1
    std::vector<std::size_t> col_indices;  // sparse only, nnz
  };

  explicit Matrix(std::shared_ptr<const Payload> payload)
      : payload_(std::move(payload)) {}

  std::shared_ptr<const Payload> payload_;
};

/// y = M x
Vector matvec(const Matrix& m, const Vector& x);

/// y = |M| x  (entrywise absolute values; used for spectral-radius bounds)
Vector abs_matvec(const Matrix& m, const Vector& x);

/// max_i sum_j |M_ij|, the infinity norm of M.
double max_abs_row_sum(const Matrix& m);

}  // namespace mcsolve
