#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcsolve {

/// Dense vector of doubles. All solver state lives in plain contiguous
/// storage so results can be compared bytewise across runs.
using Vector = std::vector<double>;

/// Coarse failure categories. The command-line tool maps these onto its
/// process exit codes, so keep the set small and stable.
enum class ErrorCategory {
  Config,  ///< invalid arguments, incompatible shapes, bad options
  Parse,   ///< malformed input files
  Solver,  ///< numerical failure: divergence, singularity, rank loss
};

/// Exception carrying an ErrorCategory alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

inline Error config_error(const std::string& message) {
  return Error(ErrorCategory::Config, message);
}
inline Error parse_error(const std::string& message) {
  return Error(ErrorCategory::Parse, message);
}
inline Error solver_error(const std::string& message) {
  return Error(ErrorCategory::Solver, message);
}

// -- small vector helpers -----------------------------------------------

inline double dot(const Vector& x, const Vector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vector& x) { return std::sqrt(dot(x, x)); }

inline double norm1(const Vector& x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

inline double norm_inf(const Vector& x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

/// y += alpha * x
inline void axpy(double alpha, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vector subtract(const Vector& x, const Vector& y) {
  Vector r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

inline bool all_finite(const Vector& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Throws a Config error unless every entry of `x` is finite.
inline void ensure_finite(const Vector& x, const std::string& name) {
  if (!all_finite(x)) {
    throw config_error(name + " contains a non-finite entry");
  }
}

inline void ensure_size(const Vector& x, std::size_t n, const std::string& name) {
  if (x.size() != n) {
    throw config_error(name + " has length " + std::to_string(x.size()) +
                       ", expected " + std::to_string(n));
  }
}

}  // namespace mcsolve
