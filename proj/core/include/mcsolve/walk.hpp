#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mcsolve/linear_system.hpp"
#include "mcsolve/matrix.hpp"
#include "mcsolve/rng.hpp"
#include "mcsolve/types.hpp"

namespace mcsolve {

// -- termination policies -------------------------------------------------

/// Exactly `length` transitions per walk (length 0 keeps only the start).
struct FixedLength {
  std::size_t length = 1;
};

/// Independent absorption with probability `kill` at every step; the same
/// uniform that picks the next state decides absorption, so each step
/// consumes exactly one draw.
struct KillingProb {
  double kill = 0.1;
};

/// Stop once the walk weight drops below `epsilon` in magnitude. Leaves a
/// deterministic truncation bias of order epsilon (bound reported).
struct WeightCutoff {
  double epsilon = 1e-6;
};

using Termination = std::variant<FixedLength, KillingProb, WeightCutoff>;

/// Which linear functional family a kernel was prepared for: Forward walks
/// follow rows of H, Adjoint walks follow rows of H^T (columns of H).
enum class WalkMode { Forward, Adjoint };

// -- transition table ------------------------------------------------------

/// Precomputed per-row sampling structure: a Walker alias table over each
/// row's transition targets plus a per-row survival factor. Building it
/// costs one pass over the operator; afterwards each step reads a single
/// bucket regardless of the state count, which is what keeps fixed-budget
/// walk runtimes flat as systems grow.
///
/// Internal to ChainKernel; exposed so tests can poke at the layout.
struct TransitionTable {
  std::size_t states = 0;
  bool dense_rows = false;
  std::vector<std::size_t> offsets;  // sparse rows: CSR offsets
  std::vector<std::size_t> cols;     // sparse rows: column per stored bin

  /// One bucket per stored bin: a uniform draw picks a bucket, and the
  /// draw's fractional remainder picks the bucket's own bin or its alias.
  /// Both candidates' masses ride along, so a step touches exactly one
  /// bucket no matter how many targets the row has.
  struct Bucket {
    double threshold = 1.0;   // own bin when the draw's fraction lies below
    std::uint32_t alias = 0;  // partner bin index within the row
    double mass_self = 0.0;
    double mass_alias = 0.0;
  };
  std::vector<Bucket> buckets;
  Vector mass;      // per-bin transition mass, conditional on surviving
  Vector survival;  // per-row survival factor in [0,1]; 0 = absorbing row

  // Provenance stamp: the operator payload and mode this table was built
  // from (null when constructed from an explicit probability matrix).
  const void* source_id = nullptr;
  WalkMode source_mode = WalkMode::Forward;

  /// Samples row `row` with uniform u in [0,1). Returns the target column
  /// and the full transition probability (bin mass times survival), or
  /// nullopt when the draw falls into the kill/absorb mass.
  std::optional<std::pair<std::size_t, double>> sample(std::size_t row,
                                                       double u) const;

  /// Probability of the specific transition row -> col (0 if unsupported).
  double prob(std::size_t row, std::size_t col) const;
};

// -- chain kernel -----------------------------------------------------------

/// Sampling law of a walk: initial distribution, transition table, and
/// termination policy. Copies share the transition table, so deriving a
/// kernel with a different start distribution (with_initial) is O(states);
/// the boosting driver leans on this every round.
class ChainKernel {
 public:
  /// Empty kernel with no states. Only useful as a placeholder while a
  /// configuration struct is being filled in; the estimators reject it.
  ChainKernel() = default;

  /// Builds from an explicit transition-probability matrix. Row sums must
  /// match the termination policy: 1 for FixedLength / WeightCutoff (or 0
  /// for absorbing rows, sub-stochastic rows allowed under WeightCutoff),
  /// 1 - kill for KillingProb. `initial` must be a probability vector.
  ChainKernel(Vector initial, const Matrix& transition, Termination term);

  /// Replaces the initial distribution, sharing the transition table.
  ChainKernel with_initial(Vector initial) const;

  std::size_t states() const { return initial_.size(); }
  const Vector& initial() const { return initial_; }
  const Termination& termination() const { return term_; }
  const TransitionTable& table() const { return *table_; }

  /// True when the table was derived from `m`'s storage in `mode`; the
  /// estimators then skip the support-coverage scan.
  bool built_from(const Matrix& m, WalkMode mode) const {
    return table_ && table_->source_id != nullptr &&
           table_->source_id == m.storage_id() && table_->source_mode == mode;
  }

  std::size_t sample_initial(double u) const;
  double initial_prob(std::size_t i) const { return initial_[i]; }

  std::optional<std::pair<std::size_t, double>> sample_step(std::size_t row,
                                                            double u) const {
    return table_->sample(row, u);
  }

 private:
  ChainKernel(std::shared_ptr<const TransitionTable> table, Vector initial,
              Termination term);

  std::shared_ptr<const TransitionTable> table_;
  Vector initial_;
  Vector initial_cdf_;
  Termination term_;

  friend ChainKernel kernel_from_operator(const Matrix&, const Vector&,
                                          WalkMode, Termination);
};

/// Importance kernel matched to an operator: transition probabilities
/// proportional to |H_ij| along rows (Forward) or |H_ji| (Adjoint), and
/// initial probabilities proportional to |support|. This choice covers the
/// operator's support by construction, which is exactly the condition the
/// estimators need for unbiasedness.
ChainKernel kernel_from_operator(const Matrix& h, const Vector& support,
                                 WalkMode mode, Termination term);

// -- estimators --------------------------------------------------------------

struct WalkConfig {
  ChainKernel kernel;
  std::size_t n_walks = 10000;
  std::uint64_t seed = 0;
  std::size_t max_steps = 10000;  ///< hard cap per walk; hits are reported
  unsigned threads = 1;           ///< 0 = hardware concurrency
  std::uint32_t stream_tag = 0;   ///< extra stream namespace (e.g. component)
};

/// What a Monte Carlo run produced. `estimate` holds one entry per
/// requested quantity (a single functional, or one entry per component).
/// `sample_variance` is the unbiased per-walk variance: divide by n_walks
/// for the variance of the reported mean.
struct EstimateReport {
  Vector estimate;
  Vector sample_variance;
  std::size_t n_walks = 0;          ///< walks per estimate entry
  double mean_walk_length = 0.0;    ///< transitions per walk
  std::size_t total_steps = 0;      ///< transitions over the whole run
  std::size_t truncated_walks = 0;  ///< stopped by the max_steps cap
  std::size_t overflowed_walks = 0; ///< tripped a weight-overflow guard
  std::optional<double> truncation_bias_bound;
  std::vector<std::string> warnings;
};

/// Collision estimator for the functional <h_vec, x> of the solution of
/// x = c + Hx. Each walk k_0 -> k_1 -> ... carries the weight
///   W_0 = h_vec(k_0) / p(k_0),  W_{l+1} = W_l * H(k_l, k_{l+1}) / P(k_l, k_{l+1})
/// and scores sum_l W_l c(k_l). Unbiased whenever the kernel covers the
/// support of h_vec and H (guaranteed for kernel_from_operator kernels;
/// verified by a one-time scan otherwise).
EstimateReport forward_estimate(const FixedPointSystem& fp, const Vector& h_vec,
                                const WalkConfig& config);

/// Adjoint estimator producing the whole solution vector at once: walks
/// start from p ~ |c|, move along H^T, and deposit their running weight
/// into the component they currently occupy.
EstimateReport adjoint_estimate(const FixedPointSystem& fp,
                                const WalkConfig& config);

/// Per-component forward estimates: for each requested index i this runs
/// forward_estimate with h_vec = e_i and the start pinned to i, using
/// config.n_walks walks per component on stream tag (config.stream_tag +
/// ordinal). The kernel's transition table is shared across components.
EstimateReport forward_estimate_components(const FixedPointSystem& fp,
                                           const std::vector<std::size_t>& components,
                                           const WalkConfig& config);

/// CSV dump: header `component,estimate,variance,n_walks`, one row per
/// estimate entry. `component_ids` labels the rows (-1 = functional).
void write_estimate_csv(const std::string& path, const EstimateReport& report,
                        const std::vector<long long>& component_ids);

}  // namespace mcsolve
