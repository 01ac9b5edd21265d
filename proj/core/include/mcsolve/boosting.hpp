#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcsolve/linear_system.hpp"
#include "mcsolve/types.hpp"
#include "mcsolve/walk.hpp"

namespace mcsolve {

/// Sequential residual correction ("Monte Carlo boosting"): keep a running
/// solution Y, measure its defect D = c + HY - Y exactly, estimate the
/// correction system Z = D + HZ stochastically, and add the estimate back.
/// Because each round's right-hand side shrinks geometrically, a fixed
/// per-round walk budget buys error of order kappa^rounds.
struct BoostConfig {
  /// Per-round walk budget: the kernel must be an Adjoint-mode kernel for
  /// the system operator (its initial distribution is replaced each round
  /// with one matched to the current defect; its stream tag is advanced
  /// per round so rounds draw independent randomness).
  WalkConfig inner;

  std::size_t rounds = 20;        ///< correction rounds after the initial estimate
  double target_residual = 1e-6;  ///< on ||D||_2 / ||c||_2

  enum class Variant {
    Exact,    ///< full defect each round, smoothed correction (one matvec)
    Sampled,  ///< defect subsampled to sample_cols coordinates per round
  };
  Variant variant = Variant::Exact;
  std::size_t sample_cols = 32;  ///< Sampled only

  /// Replaces the stochastic correction with the dense elimination oracle;
  /// boosting then converges in one round (reference / testing path).
  bool direct_inner = false;

  /// Optional deterministic Gauss-Seidel sweeps on (I - H) x = c after the
  /// stochastic rounds; off by default so the measured behavior is purely
  /// Monte Carlo.
  bool deterministic_polish = false;
  std::size_t polish_sweeps = 2;
};

struct BoostResult {
  Vector x;
  std::size_t rounds_used = 0;
  /// ||D||_2 after each completed round (length = rounds_used). Relative
  /// values follow by dividing by ||c||_2.
  Vector residual_history;
  bool converged = false;
  /// Geometric mean of successive residual ratios; absent when fewer than
  /// three positive history entries exist.
  std::optional<double> kappa_estimate;
  std::size_t total_walks = 0;
  std::vector<std::string> warnings;
};

/// Runs the boosting loop. Y_0 comes from one adjoint estimate with the
/// round budget (zero vector when inner.n_walks == 0); each round computes
/// the defect D_k = c + H·Y_k - Y_k with the *same* operator object H,
/// estimates the correction and updates Y_{k+1} = Y_k + Z_k. Stops early
/// once ||D||_2 / ||c||_2 <= target_residual. Non-convergence within the
/// round budget is reported via converged = false, not an error.
BoostResult boost_solve(const FixedPointSystem& fp, const BoostConfig& config);

/// Extra knobs for sampled_correction when called standalone; boost_solve
/// fills these from its own configuration.
struct SampledCorrectionOptions {
  std::size_t n_walks = 1000;
  Termination termination = WeightCutoff{};
  std::size_t max_steps = 10000;
  unsigned threads = 1;
  std::uint32_t stream_tag = 0;
  /// Adjoint kernel to reuse (must match the correction operator); built
  /// fresh when absent.
  std::optional<ChainKernel> kernel;
};

/// One subsampled correction round: picks sample_cols coordinates of the
/// defect with probability proportional to |D_i| (without replacement),
/// reweights them by inverse inclusion probability (Horvitz-Thompson, so
/// the sparsified right-hand side is unbiased for D), and runs the adjoint
/// estimator on the sparsified system. An all-zero defect short-circuits
/// to a zero correction.
Vector sampled_correction(const FixedPointSystem& fp_correction,
                          std::size_t sample_cols, std::uint64_t seed,
                          const SampledCorrectionOptions& options = {});

/// Probability-proportional-to-size systematic sample of `n` indices
/// without replacement, driven by a single uniform u in [0,1). Items with
/// n * share >= 1 are included with certainty (recursively), so every
/// inclusion probability is exact and available for reweighting.
struct PpsSample {
  std::vector<std::size_t> indices;          // ascending
  std::vector<double> inclusion_probability; // aligned with indices, in (0,1]
};
PpsSample systematic_pps_select(const Vector& weights, std::size_t n, double u);

/// Geometric mean of consecutive residual ratios r_{k+1}/r_k, skipping the
/// first entry (round 0 reflects the initial estimate, not the contraction
/// rate). Requires at least three positive entries.
double estimate_kappa(const Vector& residual_history);

/// CSV dump of a boosting run: header `round,residual`, 1-based rounds.
void write_residual_history_csv(const std::string& path,
                                const BoostResult& result);

}  // namespace mcsolve
