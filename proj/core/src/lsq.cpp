#include "mcsolve/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mcsolve/boosting.hpp"
#include "mcsolve/gaussian_elimination.hpp"
#include "mcsolve/linear_system.hpp"

namespace mcsolve {

namespace {

/// A = L^T diag(w) L and y = L^T diag(w) f, accumulated row by row so sparse
/// designs never densify.
std::pair<Matrix, Vector> assemble_normal_equations(const Matrix& design,
                                                    const Vector& obs,
                                                    const Vector& weights) {
  const std::size_t n = design.cols();
  Vector a_data(n * n, 0.0);
  Vector y(n, 0.0);
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t q = 0; q < design.rows(); ++q) {
    row.clear();
    design.for_each_in_row(q, [&](std::size_t j, double v) {
      if (v != 0.0) row.emplace_back(j, v);
    });
    const double w = weights[q];
    for (const auto& [j, vj] : row) {
      y[j] += w * vj * obs[q];
      const double wvj = w * vj;
      for (const auto& [k, vk] : row) a_data[j * n + k] += wvj * vk;
    }
  }
  return {Matrix::dense(n, n, std::move(a_data)), std::move(y)};
}

double weighted_objective(const Matrix& design, const Vector& obs,
                          const Vector& weights, const Vector& x) {
  Vector r = subtract(obs, matvec(design, x));
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) s += weights[q] * r[q] * r[q];
  return s;
}

/// Dispatches a square solve A x = y to the chosen inner solver.
/// `allow_fallback` routes iterative inners back to elimination when the
/// Jacobi iteration on A is not a contraction (the M-step can assemble such
/// systems when shrinkage is weak); the fallback is recorded in `notes`.
Vector solve_square(const Matrix& a, const Vector& y, const InnerSolver& inner,
                    bool allow_fallback, std::vector<std::string>* notes) {
  if (std::holds_alternative<DirectOracleInner>(inner)) {
    return gauss_solve(a, y);
  }

  if (allow_fallback) {
    bool contractive = false;
    try {
      FixedPointSystem fp = build_fixed_point(LinearSystem(a, y));
      SpectralEstimate rho = estimate_spectral_radius(fp.h);
      contractive = rho.value < 1.0;
    } catch (const Error&) {
      // zero diagonal: the Jacobi form does not even exist
    }
    if (!contractive) {
      if (notes) {
        notes->push_back(
            "assembled system is not a Jacobi contraction; "
            "fell back to direct elimination");
      }
      return gauss_solve(a, y);
    }
  }

  if (const auto* gs = std::get_if<GaussSeidelInner>(&inner)) {
    IterResult r = gauss_seidel_solve(LinearSystem(a, y), gs->config);
    if (!r.converged) {
      throw solver_error("gauss-seidel inner solver stalled at relative residual " +
                         std::to_string(r.relative_residual) + " after " +
                         std::to_string(r.iterations) + " iterations");
    }
    return std::move(r.x);
  }

  const auto& boost = std::get<BoostInner>(inner);
  FixedPointSystem fp = build_fixed_point(LinearSystem(a, y));
  BoostConfig config;
  config.inner.kernel =
      kernel_from_operator(fp.h, fp.c, WalkMode::Adjoint, boost.termination);
  config.inner.n_walks = boost.inner_walks;
  config.inner.seed = boost.seed;
  config.inner.threads = boost.threads;
  config.rounds = boost.rounds;
  config.target_residual = boost.target_residual;
  BoostResult result = boost_solve(fp, config);
  if (notes) {
    for (auto& w : result.warnings) notes->push_back(std::move(w));
  }
  if (!result.converged) {
    double last = result.residual_history.empty() ? norm2(fp.c)
                                                  : result.residual_history.back();
    throw solver_error("boosting inner solver stopped at defect norm " +
                       std::to_string(last) + " after " +
                       std::to_string(result.rounds_used) + " rounds");
  }
  return std::move(result.x);
}

}  // namespace

WlsProblem::WlsProblem(Matrix design_in, Vector obs_in, Vector weights_in)
    : design(std::move(design_in)),
      obs(std::move(obs_in)),
      weights(std::move(weights_in)) {
  if (design.empty()) throw config_error("wls design matrix is empty");
  const std::size_t q = design.rows();
  const std::size_t n = design.cols();
  if (q <= n) {
    throw config_error("wls design must be overdetermined: got " +
                       std::to_string(q) + " rows for " + std::to_string(n) +
                       " parameters");
  }
  ensure_size(obs, q, "wls observations");
  ensure_size(weights, q, "wls weights");
  ensure_finite(obs, "wls observations");
  for (double w : weights) {
    if (!std::isfinite(w) || w <= 0.0) {
      throw config_error("wls weights must be strictly positive and finite");
    }
  }
  // column independence: full check only while it is cheap
  if (q * n <= kRankCheckLimit && dense_rank(design) < n) {
    throw solver_error("wls design is column rank deficient");
  }
}

Vector wls_solve(const WlsProblem& p, const InnerSolver& inner) {
  auto [a, y] = assemble_normal_equations(p.design, p.obs, p.weights);
  return solve_square(a, y, inner, /*allow_fallback=*/false, nullptr);
}

IrlsResult irls_solve(const WlsProblem& p, const IrlsConfig& config) {
  if (!config.weight_update) {
    throw config_error("irls weight_update function is not set");
  }
  if (config.max_outer == 0) throw config_error("irls max_outer must be >= 1");
  if (!(config.weight_floor > 0.0) || !(config.weight_cap >= config.weight_floor)) {
    throw config_error("irls weight clamp range is invalid");
  }

  auto solve_at = [&](const WlsProblem& cur, std::size_t outer) {
    try {
      return wls_solve(cur, config.inner);
    } catch (const Error& e) {
      throw Error(e.category(), "irls outer iteration " + std::to_string(outer) +
                                    ": " + e.what());
    }
  };

  WlsProblem cur = p;
  IrlsResult result;
  result.x = solve_at(cur, 0);
  result.trace.push_back(
      {result.x, cur.weights,
       weighted_objective(p.design, p.obs, cur.weights, result.x)});

  for (std::size_t outer = 1; outer <= config.max_outer; ++outer) {
    Vector residual = subtract(p.obs, matvec(p.design, result.x));
    Vector updated = config.weight_update(residual);
    ensure_size(updated, p.rows(), "irls updated weights");
    for (double& w : updated) {
      if (std::isnan(w)) throw solver_error("irls weight update produced NaN");
      w = std::clamp(w, config.weight_floor, config.weight_cap);
    }
    cur.weights = std::move(updated);

    Vector next = solve_at(cur, outer);
    result.iterations = outer;
    result.trace.push_back(
        {next, cur.weights,
         weighted_objective(p.design, p.obs, cur.weights, next)});

    const double denom = std::max(norm2(next), 1e-300);
    const double change = norm2(subtract(next, result.x)) / denom;
    result.x = std::move(next);
    if (change <= config.outer_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

MStepProblem::MStepProblem(Matrix x_in, Vector lambda_in, Vector omega_in,
                           double tau_in, Vector rhs_in)
    : x_design(std::move(x_in)),
      lambda_hat(std::move(lambda_in)),
      omega_hat(std::move(omega_in)),
      tau(tau_in),
      rhs(std::move(rhs_in)) {
  if (x_design.empty()) throw config_error("m-step design matrix is empty");
  const std::size_t q = x_design.rows();
  const std::size_t n = x_design.cols();
  ensure_size(lambda_hat, n, "m-step lambda_hat");
  ensure_size(omega_hat, q, "m-step omega_hat");
  ensure_size(rhs, n, "m-step rhs");
  ensure_finite(rhs, "m-step rhs");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw config_error("m-step tau must be positive and finite");
  }
  for (double v : lambda_hat) {
    if (!std::isfinite(v) || v < 0.0) {
      throw config_error("m-step lambda_hat must be nonnegative and finite");
    }
  }
  for (double v : omega_hat) {
    if (!std::isfinite(v) || v < 0.0) {
      throw config_error("m-step omega_hat must be nonnegative and finite");
    }
  }
}

Vector mstep_solve(const MStepProblem& p, const InnerSolver& inner) {
  Matrix a = assemble_normal_equations(p.x_design, Vector(p.x_design.rows(), 0.0),
                                       p.omega_hat)
                 .first;
  // ridge diagonal tau^-2 lambda_hat on top of X^T Omega X
  const std::size_t n = p.params();
  Vector a_data(a.dense_data(), a.dense_data() + n * n);
  const double inv_tau2 = 1.0 / (p.tau * p.tau);
  for (std::size_t i = 0; i < n; ++i) {
    a_data[i * n + i] += inv_tau2 * p.lambda_hat[i];
  }
  Matrix system = Matrix::dense(n, n, std::move(a_data));
  std::vector<std::string> notes;
  return solve_square(system, p.rhs, inner, /*allow_fallback=*/true, &notes);
}

StableMStepProblem::StableMStepProblem(Matrix x_minus_s_in, Matrix x_s_in,
                                       Vector lambda_minus_s_inv_in,
                                       Matrix prior_block_in, Vector rhs_top_in,
                                       Vector rhs_constraint_in)
    : x_minus_s(std::move(x_minus_s_in)),
      x_s(std::move(x_s_in)),
      lambda_minus_s_inv(std::move(lambda_minus_s_inv_in)),
      prior_block(std::move(prior_block_in)),
      rhs_top(std::move(rhs_top_in)),
      rhs_constraint(std::move(rhs_constraint_in)) {
  const std::size_t n = rhs_top.size();
  if (n == 0) throw config_error("stable m-step rhs_top is empty");
  ensure_finite(rhs_top, "stable m-step rhs_top");
  if (prior_block.rows() != n || prior_block.cols() != n) {
    throw config_error("stable m-step prior_block must be " + std::to_string(n) +
                       "x" + std::to_string(n));
  }
  if (!x_minus_s.empty()) {
    if (x_minus_s.cols() != n) {
      throw config_error("stable m-step x_minus_s column count mismatch");
    }
    ensure_size(lambda_minus_s_inv, x_minus_s.rows(), "stable m-step lambda_minus_s_inv");
    for (double v : lambda_minus_s_inv) {
      if (!std::isfinite(v) || v < 0.0) {
        throw config_error(
            "stable m-step lambda_minus_s_inv must be nonnegative and finite");
      }
    }
  } else if (!lambda_minus_s_inv.empty()) {
    throw config_error("stable m-step lambda_minus_s_inv given without x_minus_s");
  }
  if (!x_s.empty()) {
    if (x_s.cols() != n) {
      throw config_error("stable m-step x_s column count mismatch");
    }
    ensure_size(rhs_constraint, x_s.rows(), "stable m-step rhs_constraint");
    ensure_finite(rhs_constraint, "stable m-step rhs_constraint");
  } else if (!rhs_constraint.empty()) {
    throw config_error("stable m-step rhs_constraint given without x_s");
  }
}

StableMStepSolution stable_mstep_solve(const StableMStepProblem& p) {
  const std::size_t n = p.params();

  // B = prior_block + X_-s^T diag(lambda^-1) X_-s, dense and symmetric
  Vector b_data(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) b_data[i * n + j] = p.prior_block.at(i, j);
  }
  if (!p.x_minus_s.empty()) {
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t u = 0; u < p.x_minus_s.rows(); ++u) {
      row.clear();
      p.x_minus_s.for_each_in_row(u, [&](std::size_t j, double v) {
        if (v != 0.0) row.emplace_back(j, v);
      });
      const double linv = p.lambda_minus_s_inv[u];
      for (const auto& [j, vj] : row) {
        const double lv = linv * vj;
        for (const auto& [k, vk] : row) b_data[j * n + k] += lv * vk;
      }
    }
  }
  Matrix b = Matrix::dense(n, n, std::move(b_data));

  Vector t;
  std::vector<Vector> w_cols;
  try {
    const std::size_t s = p.constraints();
    std::vector<Vector> rhs;
    rhs.reserve(s + 1);
    rhs.push_back(p.rhs_top);
    for (std::size_t j = 0; j < s; ++j) {
      Vector col(n);
      for (std::size_t k = 0; k < n; ++k) col[k] = p.x_s.at(j, k);
      rhs.push_back(std::move(col));
    }
    std::vector<Vector> solved = gauss_solve_multi(b, rhs);
    t = std::move(solved.front());
    w_cols.assign(std::make_move_iterator(solved.begin() + 1),
                  std::make_move_iterator(solved.end()));
  } catch (const Error& e) {
    throw solver_error(std::string("stable m-step penalized block B_-s: ") +
                       e.what());
  }

  if (p.constraints() == 0) return {std::move(t), {}};

  // Schur block G = X_s B^{-1} X_s^T and the correction z = G^{-1}(r_c - X_s t):
  // beta = t + W z recovers the block-inverse formula built on F = -G^{-1},
  // and psi = -z are the multipliers.
  const std::size_t s = p.constraints();
  Vector g_data(s * s);
  for (std::size_t i = 0; i < s; ++i) {
    Vector xs_row(n);
    for (std::size_t k = 0; k < n; ++k) xs_row[k] = p.x_s.at(i, k);
    for (std::size_t j = 0; j < s; ++j) g_data[i * s + j] = dot(xs_row, w_cols[j]);
  }
  Vector gap = subtract(p.rhs_constraint, matvec(p.x_s, t));

  Vector z;
  try {
    z = gauss_solve(Matrix::dense(s, s, std::move(g_data)), gap);
  } catch (const Error& e) {
    throw solver_error(
        std::string("stable m-step constraint block X_s B^{-1} X_s^T: ") +
        e.what());
  }

  StableMStepSolution solution;
  solution.beta = std::move(t);
  for (std::size_t j = 0; j < s; ++j) axpy(z[j], w_cols[j], solution.beta);
  solution.psi.resize(s);
  for (std::size_t j = 0; j < s; ++j) solution.psi[j] = -z[j];
  return solution;
}

}  // namespace mcsolve
