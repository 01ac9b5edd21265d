#include "mcsolve/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "mcsolve/gaussian_elimination.hpp"
#include "mcsolve/io.hpp"

namespace mcsolve {

double estimate_kappa(const Vector& residual_history) {
  if (residual_history.size() < 3) {
    throw config_error("kappa estimate needs at least 3 residuals");
  }
  for (double r : residual_history) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw config_error("kappa estimate needs positive residuals");
    }
  }
  // Round 0 mostly reflects the initial estimate, not the per-round
  // contraction, so the ratios start at entry 1.
  double log_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 2; k < residual_history.size(); ++k) {
    log_sum += std::log(residual_history[k] / residual_history[k - 1]);
    ++count;
  }
  return std::exp(log_sum / static_cast<double>(count));
}

PpsSample systematic_pps_select(const Vector& weights, std::size_t n, double u) {
  if (n == 0) throw config_error("sample size must be positive");
  if (!(u >= 0.0) || u >= 1.0) throw config_error("u must lie in [0,1)");

  std::vector<std::size_t> remaining;
  remaining.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double w = weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw config_error("sampling weights must be non-negative and finite");
    }
    if (w > 0.0) remaining.push_back(i);
  }
  if (remaining.empty()) {
    throw config_error("sampling weights must not be all zero");
  }

  PpsSample out;
  std::size_t budget = n;

  // Certainty pass: any item whose scaled share reaches 1 is included with
  // probability exactly 1 and removed; shares are then recomputed, since
  // removing a heavy item can push others over the threshold.
  for (;;) {
    if (budget == 0) break;
    if (remaining.size() <= budget) {  // everything left fits
      for (std::size_t i : remaining) {
        out.indices.push_back(i);
        out.inclusion_probability.push_back(1.0);
      }
      budget -= remaining.size();
      remaining.clear();
      break;
    }
    double total = 0.0;
    for (std::size_t i : remaining) total += weights[i];
    std::vector<std::size_t> keep;
    keep.reserve(remaining.size());
    bool moved = false;
    for (std::size_t i : remaining) {
      if (static_cast<double>(budget) * weights[i] >= total) {
        out.indices.push_back(i);
        out.inclusion_probability.push_back(1.0);
        --budget;
        moved = true;
      } else {
        keep.push_back(i);
      }
    }
    remaining.swap(keep);
    if (!moved) break;
  }

  // Systematic pass over what is left: all scaled shares are now < 1, so
  // the equally spaced probes u, u+1, ... pick each item at most once and
  // the inclusion probability is the scaled share itself.
  if (budget > 0 && !remaining.empty()) {
    double total = 0.0;
    for (std::size_t i : remaining) total += weights[i];
    double cursor = u;
    double cum = 0.0;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      const std::size_t i = remaining[k];
      const double share =
          static_cast<double>(budget) * weights[i] / total;
      cum = (k + 1 == remaining.size()) ? static_cast<double>(budget)
                                        : cum + share;
      if (cursor < cum) {
        out.indices.push_back(i);
        out.inclusion_probability.push_back(share);
        cursor += 1.0;
      }
    }
  }

  // Ascending index order, probabilities kept aligned.
  std::vector<std::size_t> order(out.indices.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.indices[a] < out.indices[b];
  });
  PpsSample sorted;
  sorted.indices.reserve(order.size());
  sorted.inclusion_probability.reserve(order.size());
  for (std::size_t k : order) {
    sorted.indices.push_back(out.indices[k]);
    sorted.inclusion_probability.push_back(out.inclusion_probability[k]);
  }
  return sorted;
}

Vector sampled_correction(const FixedPointSystem& fp_correction,
                          std::size_t sample_cols, std::uint64_t seed,
                          const SampledCorrectionOptions& options) {
  const std::size_t m = fp_correction.size();
  if (sample_cols < 1 || sample_cols > m) {
    throw config_error("sample_cols must lie in [1, m]");
  }
  const Vector& d = fp_correction.c;

  Vector magnitude(m);
  bool any = false;
  for (std::size_t i = 0; i < m; ++i) {
    magnitude[i] = std::abs(d[i]);
    any = any || magnitude[i] > 0.0;
  }
  if (!any) return Vector(m, 0.0);  // converged defect

  const double u =
      RandomStream(seed, kDomainSampling, options.stream_tag).uniform(0, 0);
  PpsSample sample = systematic_pps_select(magnitude, sample_cols, u);

  // Horvitz-Thompson: keep the drawn coordinates, divided by their
  // inclusion probability, so E[d_tilde] = d componentwise.
  Vector d_tilde(m, 0.0);
  for (std::size_t k = 0; k < sample.indices.size(); ++k) {
    d_tilde[sample.indices[k]] =
        d[sample.indices[k]] / sample.inclusion_probability[k];
  }

  Vector start(m, 0.0);
  for (std::size_t i : sample.indices) start[i] = std::abs(d_tilde[i]);

  FixedPointSystem sparsified(fp_correction.h, std::move(d_tilde),
                              fp_correction.rho);

  ChainKernel kernel =
      options.kernel
          ? options.kernel->with_initial(std::move(start))
          : kernel_from_operator(fp_correction.h, sparsified.c,
                                 WalkMode::Adjoint, options.termination);

  WalkConfig walk{std::move(kernel), options.n_walks, seed,
                  options.max_steps, options.threads, options.stream_tag};
  return adjoint_estimate(sparsified, walk).estimate;
}

namespace {

std::size_t count_nonzero(const Vector& v) {
  std::size_t n = 0;
  for (double x : v) n += x != 0.0;
  return n;
}

/// d += (H - I) z for a mostly-zero z: gathers only z's nonzero columns,
/// which keeps Sampled rounds at O(m * nnz(z)) instead of a full matvec.
void apply_sparse_update(const Matrix& h, const Vector& z, Vector& d) {
  std::vector<std::size_t> nz;
  nz.reserve(64);
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] != 0.0) nz.push_back(j);
  }
  const std::size_t m = d.size();
  const double* data = h.dense_data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = data + i * m;
    double acc = 0.0;
    for (std::size_t j : nz) acc += row[j] * z[j];
    d[i] += acc - z[i];
  }
}

/// One Gauss-Seidel sweep on (I - H) x = c, in place.
void polish_sweep(const FixedPointSystem& fp, Vector& x) {
  const std::size_t m = fp.size();
  for (std::size_t i = 0; i < m; ++i) {
    double s = fp.c[i];
    double diag = 0.0;
    fp.h.for_each_in_row(i, [&](std::size_t j, double v) {
      if (j == i) {
        diag = v;
      } else {
        s += v * x[j];
      }
    });
    const double denom = 1.0 - diag;
    if (std::abs(denom) < 1e-12) {
      throw solver_error("polish sweep hit a unit diagonal in H");
    }
    x[i] = s / denom;
  }
}

}  // namespace

BoostResult boost_solve(const FixedPointSystem& fp, const BoostConfig& config) {
  const std::size_t m = fp.size();
  if (config.rounds < 1) throw config_error("rounds must be at least 1");
  if (!(config.target_residual > 0.0)) {
    throw config_error("target residual must be positive");
  }
  if (config.variant == BoostConfig::Variant::Sampled &&
      (config.sample_cols < 1 || config.sample_cols > m)) {
    throw config_error("sample_cols must lie in [1, m]");
  }
  if (config.inner.kernel.states() != m) {
    throw config_error("inner kernel state count does not match the system");
  }
  if (!config.inner.kernel.built_from(fp.h, WalkMode::Adjoint)) {
    throw config_error(
        "boosting needs an adjoint kernel built from the system operator "
        "(kernel_from_operator with WalkMode::Adjoint)");
  }

  BoostResult result;

  // Convergence gate on the walk-weight growth factor.
  double rho = fp.rho ? *fp.rho : estimate_spectral_radius(fp.h).value;
  FixedPointSystem gated = fp.with_rho(rho);
  if (rho > kSpectralRadiusGate) {
    result.warnings.push_back(
        "estimated spectral radius " + std::to_string(rho) + " exceeds " +
        std::to_string(kSpectralRadiusGate) + "; proceeding anyway");
  }

  const double c_norm = norm2(fp.c);
  const double denom = c_norm > 0.0 ? c_norm : 1.0;
  const bool mc_inner = !config.direct_inner && config.inner.n_walks > 0;

  // Initial estimate: one adjoint run with the round budget.
  Vector y(m, 0.0);
  if (mc_inner && norm1(fp.c) > 0.0) {
    WalkConfig initial = config.inner;
    initial.kernel = config.inner.kernel.with_initial([&] {
      Vector p(m);
      for (std::size_t i = 0; i < m; ++i) p[i] = std::abs(fp.c[i]);
      return p;
    }());
    y = adjoint_estimate(gated, initial).estimate;
    result.total_walks += initial.n_walks;
  }

  Vector defect = residual_fp(gated, y);
  if (norm2(defect) / denom <= config.target_residual) {
    result.x = std::move(y);
    result.converged = true;
    return result;
  }

  // Dense I - H for the elimination reference path.
  Matrix direct_matrix;
  if (config.direct_inner) {
    Matrix hd = fp.h.to_dense();
    Vector values(hd.dense_data(), hd.dense_data() + m * m);
    for (double& v : values) v = -v;
    for (std::size_t i = 0; i < m; ++i) values[i * m + i] += 1.0;
    direct_matrix = Matrix::dense(m, m, std::move(values));
  }

  for (std::size_t round = 0; round < config.rounds; ++round) {
    const std::uint32_t tag =
        config.inner.stream_tag + static_cast<std::uint32_t>(round) + 1;

    Vector correction;
    if (config.direct_inner) {
      correction = gauss_solve(direct_matrix, defect);
    } else if (config.variant == BoostConfig::Variant::Exact) {
      // Correction system Z = D + HZ shares the operator object itself.
      FixedPointSystem correction_system(fp.h, defect, rho);
      WalkConfig walk = config.inner;
      walk.kernel = config.inner.kernel.with_initial([&] {
        Vector p(m);
        for (std::size_t i = 0; i < m; ++i) p[i] = std::abs(defect[i]);
        return p;
      }());
      walk.stream_tag = tag;
      Vector raw = adjoint_estimate(correction_system, walk).estimate;
      result.total_walks += walk.n_walks;
      // One smoothing half-step: Z := D + H Zhat keeps the estimate
      // unbiased, contracts its noise by H, and is exact when H = 0.
      Vector h_raw = matvec(fp.h, raw);
      correction.resize(m);
      for (std::size_t i = 0; i < m; ++i) correction[i] = defect[i] + h_raw[i];
    } else {
      FixedPointSystem correction_system(fp.h, defect, rho);
      SampledCorrectionOptions options;
      options.n_walks = config.inner.n_walks;
      options.termination = config.inner.kernel.termination();
      options.max_steps = config.inner.max_steps;
      options.threads = config.inner.threads;
      options.stream_tag = tag;
      options.kernel = config.inner.kernel;
      correction = sampled_correction(correction_system, config.sample_cols,
                                      config.inner.seed, options);
      result.total_walks += config.inner.n_walks;
    }

    for (std::size_t i = 0; i < m; ++i) y[i] += correction[i];

    // Defect of the updated iterate. Sampled corrections are mostly zeros,
    // so the update touches only their support; other paths recompute via
    // one full matvec.
    if (config.variant == BoostConfig::Variant::Sampled &&
        !config.direct_inner && fp.h.is_dense() &&
        count_nonzero(correction) * 4 < m) {
      apply_sparse_update(fp.h, correction, defect);
    } else {
      defect = residual_fp(gated, y);
    }

    const double r = norm2(defect);
    result.residual_history.push_back(r);
    if (r / denom <= config.target_residual) {
      result.converged = true;
      break;
    }
  }
  result.rounds_used = result.residual_history.size();

  if (config.deterministic_polish) {
    for (std::size_t s = 0; s < config.polish_sweeps; ++s) polish_sweep(gated, y);
    defect = residual_fp(gated, y);
    if (norm2(defect) / denom <= config.target_residual) result.converged = true;
  }

  bool kappa_ready = result.residual_history.size() >= 3;
  for (double r : result.residual_history) kappa_ready = kappa_ready && r > 0.0;
  if (kappa_ready) {
    result.kappa_estimate = estimate_kappa(result.residual_history);
  }

  result.x = std::move(y);
  return result;
}

void write_residual_history_csv(const std::string& path,
                                const BoostResult& result) {
  ensure_parent_directory(path);
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  out << "round,residual\n";
  for (std::size_t k = 0; k < result.residual_history.size(); ++k) {
    out << (k + 1) << "," << format_double(result.residual_history[k]) << "\n";
  }
  if (!out) throw config_error("write failed for " + path);
}

}  // namespace mcsolve
