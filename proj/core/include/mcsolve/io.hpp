#pragma once

#include <string>
#include <vector>

#include "mcsolve/matrix.hpp"
#include "mcsolve/types.hpp"

namespace mcsolve {

/// Matrix Market readers/writers ("%%MatrixMarket matrix ..."), ASCII,
/// real general, 1-based indices. Both the `coordinate` (sparse) and
/// `array` (dense, column-major) layouts are supported. Parse failures
/// throw Parse errors that cite the file and line.
Matrix read_matrix_market(const std::string& path);

enum class MatrixMarketLayout { Auto, Coordinate, Array };

/// Writes coordinate form for sparse storage and array form for dense
/// storage unless a layout is forced. Values keep full double precision.
void write_matrix_market(const std::string& path, const Matrix& m,
                         MatrixMarketLayout layout = MatrixMarketLayout::Auto);

/// Single-column CSV vector: one value per line; a leading non-numeric
/// line is treated as a header and skipped.
Vector read_vector_csv(const std::string& path);
void write_vector_csv(const std::string& path, const Vector& v);

/// Weighted-least-squares input bundle read from CSV. Expected header:
/// design columns named x0..x{N-1}, observation column `f`, and an
/// optional positive weight column `w` (defaults to 1).
struct WlsData {
  Matrix design;
  Vector observations;
  Vector weights;
};
WlsData read_wls_csv(const std::string& path);

/// Full-precision decimal rendering of a double (round-trips exactly).
std::string format_double(double value);

/// Creates the parent directory of `path` if needed and opens it for
/// writing; shared by every writer here and by the benchmark CSV output.
void ensure_parent_directory(const std::string& path);

}  // namespace mcsolve
