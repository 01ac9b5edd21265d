#include "mcsolve/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mcsolve {

namespace {

[[noreturn]] void fail_at(const std::string& path, std::size_t line,
                          const std::string& what) {
  throw parse_error(path + ":" + std::to_string(line) + ": " + what);
}

bool parse_double(const std::string& token, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(token, &used);
    return used == token.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_index(const std::string& token, std::size_t& out) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(token, &used);
    if (used != token.size() || v < 0) return false;
    out = static_cast<std::size_t>(v);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    // trim surrounding whitespace
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string()
                                         : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct LineReader {
  std::ifstream in;
  std::string path;
  std::size_t line_no = 0;

  explicit LineReader(const std::string& p) : in(p), path(p) {
    if (!in) throw parse_error("cannot open " + p);
  }

  /// Next line that is neither blank nor a % comment; false at EOF.
  bool next_content(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::size_t first = line.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      if (line[first] == '%') continue;
      return true;
    }
    return false;
  }
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void ensure_parent_directory(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
}

Matrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) fail_at(path, 1, "empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  auto fields = split_ws(lower(header));
  if (fields.size() < 4 || fields[0] != "%%matrixmarket" || fields[1] != "matrix") {
    fail_at(path, 1, "expected '%%MatrixMarket matrix ...' banner");
  }
  const std::string& layout = fields[2];
  const std::string& scalar = fields[3];
  const std::string symmetry = fields.size() > 4 ? fields[4] : "general";
  if (layout != "coordinate" && layout != "array") {
    fail_at(path, 1, "unsupported layout '" + layout + "'");
  }
  if (scalar != "real" && scalar != "integer") {
    fail_at(path, 1, "unsupported field type '" + scalar + "' (need real)");
  }
  if (symmetry != "general") {
    fail_at(path, 1, "unsupported symmetry '" + symmetry + "' (need general)");
  }

  LineReader reader(path);
  reader.in.close();
  reader.in.open(path);
  std::string line;
  // consume the banner we already validated
  std::getline(reader.in, line);
  reader.line_no = 1;

  if (!reader.next_content(line)) fail_at(path, reader.line_no, "missing size line");
  auto size_tok = split_ws(line);

  if (layout == "coordinate") {
    if (size_tok.size() != 3) {
      fail_at(path, reader.line_no, "size line needs 'rows cols nnz'");
    }
    std::size_t rows, cols, nnz;
    if (!parse_index(size_tok[0], rows) || !parse_index(size_tok[1], cols) ||
        !parse_index(size_tok[2], nnz)) {
      fail_at(path, reader.line_no, "invalid size line");
    }
    std::vector<Triplet> entries;
    entries.reserve(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
      if (!reader.next_content(line)) {
        fail_at(path, reader.line_no, "expected " + std::to_string(nnz) +
                                          " entries, file ended after " +
                                          std::to_string(k));
      }
      auto tok = split_ws(line);
      if (tok.size() != 3) {
        fail_at(path, reader.line_no,
                "expected 'row col value', got " + std::to_string(tok.size()) +
                    " fields");
      }
      std::size_t i, j;
      double v;
      if (!parse_index(tok[0], i) || !parse_index(tok[1], j) || i == 0 || j == 0) {
        fail_at(path, reader.line_no, "indices must be positive integers");
      }
      if (!parse_double(tok[2], v)) {
        fail_at(path, reader.line_no, "invalid value '" + tok[2] + "'");
      }
      if (i > rows || j > cols) {
        fail_at(path, reader.line_no, "entry (" + std::to_string(i) + "," +
                                          std::to_string(j) + ") outside " +
                                          std::to_string(rows) + "x" +
                                          std::to_string(cols));
      }
      entries.push_back({i - 1, j - 1, v});
    }
    if (reader.next_content(line)) {
      fail_at(path, reader.line_no, "trailing data after declared entries");
    }
    try {
      return Matrix::sparse_from_triplets(rows, cols, std::move(entries));
    } catch (const Error& e) {
      throw parse_error(path + ": " + e.what());
    }
  }

  // array layout: dense, values in column-major order
  if (size_tok.size() != 2) {
    fail_at(path, reader.line_no, "size line needs 'rows cols'");
  }
  std::size_t rows, cols;
  if (!parse_index(size_tok[0], rows) || !parse_index(size_tok[1], cols)) {
    fail_at(path, reader.line_no, "invalid size line");
  }
  Vector values(rows * cols, 0.0);
  std::size_t count = 0;
  while (count < rows * cols) {
    if (!reader.next_content(line)) {
      fail_at(path, reader.line_no, "expected " + std::to_string(rows * cols) +
                                        " values, file ended after " +
                                        std::to_string(count));
    }
    for (const std::string& tok : split_ws(line)) {
      if (count >= rows * cols) {
        fail_at(path, reader.line_no, "trailing data after declared entries");
      }
      double v;
      if (!parse_double(tok, v)) {
        fail_at(path, reader.line_no, "invalid value '" + tok + "'");
      }
      std::size_t col = count / rows;
      std::size_t row = count % rows;
      values[row * cols + col] = v;
      ++count;
    }
  }
  if (reader.next_content(line)) {
    fail_at(path, reader.line_no, "trailing data after declared entries");
  }
  try {
    return Matrix::dense(rows, cols, std::move(values));
  } catch (const Error& e) {
    throw parse_error(path + ": " + e.what());
  }
}

void write_matrix_market(const std::string& path, const Matrix& m,
                         MatrixMarketLayout layout) {
  if (layout == MatrixMarketLayout::Auto) {
    layout = m.is_dense() ? MatrixMarketLayout::Array
                          : MatrixMarketLayout::Coordinate;
  }
  ensure_parent_directory(path);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::Config, "cannot write " + path);

  if (layout == MatrixMarketLayout::Coordinate) {
    Matrix s = m.is_dense() ? m.to_sparse() : m;
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << s.rows() << " " << s.cols() << " " << s.stored_entries() << "\n";
    for (std::size_t i = 0; i < s.rows(); ++i) {
      s.for_each_in_row(i, [&](std::size_t j, double v) {
        out << (i + 1) << " " << (j + 1) << " " << format_double(v) << "\n";
      });
    }
  } else {
    Matrix d = m.to_dense();
    out << "%%MatrixMarket matrix array real general\n";
    out << d.rows() << " " << d.cols() << "\n";
    for (std::size_t j = 0; j < d.cols(); ++j) {
      for (std::size_t i = 0; i < d.rows(); ++i) {
        out << format_double(d.at(i, j)) << "\n";
      }
    }
  }
  if (!out) throw Error(ErrorCategory::Config, "write failed for " + path);
}

Vector read_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  Vector v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    double x;
    if (!parse_double(line.substr(first), x)) {
      if (line_no == 1 && v.empty()) continue;  // header line
      fail_at(path, line_no, "invalid value '" + line + "'");
    } else {
      v.push_back(x);
    }
  }
  if (v.empty()) throw parse_error(path + ": no values found");
  return v;
}

void write_vector_csv(const std::string& path, const Vector& v) {
  ensure_parent_directory(path);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::Config, "cannot write " + path);
  for (double x : v) out << format_double(x) << "\n";
  if (!out) throw Error(ErrorCategory::Config, "write failed for " + path);
}

WlsData read_wls_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);

  std::vector<std::size_t> design_cols;  // column index -> design position
  std::ptrdiff_t obs_col = -1, weight_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = lower(header[c]);
    if (name == "f") {
      obs_col = static_cast<std::ptrdiff_t>(c);
    } else if (name == "w") {
      weight_col = static_cast<std::ptrdiff_t>(c);
    } else if (name.size() >= 2 && name[0] == 'x') {
      std::size_t pos;
      if (!parse_index(name.substr(1), pos) || pos != design_cols.size()) {
        fail_at(path, 1, "design columns must be named x0,x1,... in order");
      }
      design_cols.push_back(c);
    } else {
      fail_at(path, 1, "unknown column '" + header[c] + "'");
    }
  }
  if (design_cols.empty()) fail_at(path, 1, "no design columns (x0,x1,...)");
  if (obs_col < 0) fail_at(path, 1, "missing observation column 'f'");

  const std::size_t n_design = design_cols.size();
  Vector design_values;
  Vector obs, weights;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t,") == std::string::npos) continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      fail_at(path, line_no, "expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < n_design; ++k) {
      double v;
      if (!parse_double(fields[design_cols[k]], v)) {
        fail_at(path, line_no, "invalid value '" + fields[design_cols[k]] + "'");
      }
      design_values.push_back(v);
    }
    double f;
    if (!parse_double(fields[static_cast<std::size_t>(obs_col)], f)) {
      fail_at(path, line_no, "invalid observation");
    }
    obs.push_back(f);
    double w = 1.0;
    if (weight_col >= 0 &&
        !parse_double(fields[static_cast<std::size_t>(weight_col)], w)) {
      fail_at(path, line_no, "invalid weight");
    }
    weights.push_back(w);
  }
  if (obs.empty()) throw parse_error(path + ": no data rows");

  WlsData data;
  data.design = Matrix::dense(obs.size(), n_design, std::move(design_values));
  data.observations = std::move(obs);
  data.weights = std::move(weights);
  return data;
}

}  // namespace mcsolve
