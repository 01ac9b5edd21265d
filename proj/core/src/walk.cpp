#include "mcsolve/walk.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "hugepage_hint.hpp"
#include "mcsolve/io.hpp"
#include "mcsolve/parallel.hpp"

namespace mcsolve {

namespace {

constexpr double kRowSumTolerance = 1e-10;

double kill_mass(const Termination& term) {
  if (const auto* k = std::get_if<KillingProb>(&term)) {
    if (!(k->kill > 0.0) || !(k->kill < 1.0)) {
      throw config_error("killing probability must lie in (0, 1)");
    }
    return k->kill;
  }
  return 0.0;
}

double cutoff_of(const Termination& term) {
  if (const auto* w = std::get_if<WeightCutoff>(&term)) {
    if (!(w->epsilon > 0.0)) {
      throw config_error("weight cutoff must be positive");
    }
    return w->epsilon;
  }
  return 0.0;
}

/// Reusable per-row workspace for the alias construction.
struct AliasScratch {
  std::vector<double> scaled;
  std::vector<std::uint32_t> below;
  std::vector<std::uint32_t> above;
};

/// Divides one row's raw masses by their total, leaving per-bin transition
/// probabilities conditional on surviving the step.
void normalize_row_mass(Vector& mass, std::size_t begin, std::size_t end,
                        double total) {
  for (std::size_t k = begin; k < end; ++k) mass[k] /= total;
}

/// Walker alias construction for one row (Vose's stack variant): each bin
/// below the average mass tops its bucket up from a bin above the average,
/// so picking a bucket uniformly and then one threshold test realizes the
/// row law exactly. Bins left over by rounding keep threshold 1 (always
/// self), which loses no mass because their scaled remainder is 1 up to
/// round-off.
void build_row_buckets(const Vector& mass, std::size_t begin, std::size_t end,
                       std::vector<TransitionTable::Bucket>& buckets,
                       AliasScratch& scratch) {
  const std::size_t n = end - begin;
  scratch.scaled.resize(n);
  scratch.below.clear();
  scratch.above.clear();
  for (std::size_t k = 0; k < n; ++k) {
    scratch.scaled[k] = mass[begin + k] * static_cast<double>(n);
    TransitionTable::Bucket& b = buckets[begin + k];
    b.threshold = 1.0;
    b.alias = static_cast<std::uint32_t>(k);
    b.mass_self = mass[begin + k];
    b.mass_alias = mass[begin + k];
    (scratch.scaled[k] < 1.0 ? scratch.below : scratch.above)
        .push_back(static_cast<std::uint32_t>(k));
  }
  while (!scratch.below.empty() && !scratch.above.empty()) {
    const std::uint32_t j = scratch.below.back();
    scratch.below.pop_back();
    const std::uint32_t g = scratch.above.back();
    TransitionTable::Bucket& b = buckets[begin + j];
    b.threshold = scratch.scaled[j];
    b.alias = g;
    b.mass_alias = mass[begin + g];
    scratch.scaled[g] -= 1.0 - scratch.scaled[j];
    if (scratch.scaled[g] < 1.0) {
      scratch.above.pop_back();
      scratch.below.push_back(g);
    }
  }
}

/// First index in [0, size) whose value exceeds v; same contract as
/// std::upper_bound, but the step is an arithmetic select instead of a
/// data-dependent branch a random draw would mispredict half the time.
/// Requires a value greater than v at size - 1, which the initial cdf
/// provides by pinning its last entry to 1 while draws stay below 1.
std::size_t cdf_find(const double* base, std::size_t size, double v) {
  const double* p = base;
  std::size_t n = size;
  while (n > 1) {
    const std::size_t half = n / 2;
    p += static_cast<std::size_t>(p[half - 1] <= v) * half;
    n -= half;
  }
  return static_cast<std::size_t>(p - base);
}

}  // namespace

// -- TransitionTable ---------------------------------------------------------

std::optional<std::pair<std::size_t, double>> TransitionTable::sample(
    std::size_t row, double u) const {
  const double s = survival[row];
  if (s <= 0.0 || u >= s) return std::nullopt;  // absorbed or killed
  double v = u / s;
  // u < s guarantees v < 1 in exact arithmetic; rounding can still land on
  // 1.0, which would walk off the bucket row.
  if (v >= 1.0) v = 0x1.fffffffffffffp-1;

  std::size_t begin, n;
  if (dense_rows) {
    begin = row * states;
    n = states;
  } else {
    begin = offsets[row];
    n = offsets[row + 1] - begin;
  }
  const double x = v * static_cast<double>(n);
  std::size_t j = static_cast<std::size_t>(x);
  if (j >= n) j = n - 1;  // v*n can round up to n
  const Bucket& b = buckets[begin + j];
  const bool self = x - static_cast<double>(j) < b.threshold;
  const std::size_t bin = self ? j : static_cast<std::size_t>(b.alias);
  const double m = self ? b.mass_self : b.mass_alias;
  // A zero-mass bin is reachable only through threshold round-off, a
  // measure-zero event; treat it as absorption rather than divide by it.
  if (!(m > 0.0)) return std::nullopt;
  const std::size_t col = dense_rows ? bin : cols[begin + bin];
  return std::make_pair(col, m * s);
}

double TransitionTable::prob(std::size_t row, std::size_t col) const {
  const double s = survival[row];
  if (s <= 0.0) return 0.0;
  if (dense_rows) return mass[row * states + col] * s;
  auto begin = cols.begin() + static_cast<std::ptrdiff_t>(offsets[row]);
  auto end = cols.begin() + static_cast<std::ptrdiff_t>(offsets[row + 1]);
  auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return mass[static_cast<std::size_t>(it - cols.begin())] * s;
}

namespace {

/// Table over |weights(i, j)| where weights is read through `row_of`:
/// rows of H (forward) or rows of H^T (adjoint). Shares the layout of the
/// matrix passed in.
std::shared_ptr<TransitionTable> build_table_from_operator(const Matrix& walk_matrix,
                                                           double survival_factor) {
  const std::size_t n = walk_matrix.rows();
  auto table = std::make_shared<TransitionTable>();
  table->states = n;
  table->survival.assign(n, 0.0);

  AliasScratch scratch;
  if (walk_matrix.is_dense()) {
    table->dense_rows = true;
    table->mass.assign(n * n, 0.0);
    table->buckets.assign(n * n, {});
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      walk_matrix.for_each_in_row(i, [&](std::size_t j, double v) {
        double a = std::abs(v);
        table->mass[i * n + j] = a;
        total += a;
      });
      if (total > 0.0) {
        normalize_row_mass(table->mass, i * n, i * n + n, total);
        build_row_buckets(table->mass, i * n, i * n + n, table->buckets, scratch);
        table->survival[i] = survival_factor;
      }
    }
    detail::hint_huge_pages(table->buckets.data(),
                            table->buckets.size() * sizeof(TransitionTable::Bucket));
    return table;
  }

  table->dense_rows = false;
  table->offsets.assign(n + 1, 0);
  table->cols.reserve(walk_matrix.stored_entries());
  table->mass.reserve(walk_matrix.stored_entries());
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    std::size_t begin = table->cols.size();
    walk_matrix.for_each_in_row(i, [&](std::size_t j, double v) {
      double a = std::abs(v);
      if (a > 0.0) {
        table->cols.push_back(j);
        table->mass.push_back(a);
        total += a;
      }
    });
    table->buckets.resize(table->cols.size());
    if (total > 0.0) {
      normalize_row_mass(table->mass, begin, table->cols.size(), total);
      build_row_buckets(table->mass, begin, table->cols.size(), table->buckets,
                        scratch);
      table->survival[i] = survival_factor;
    }
    table->offsets[i + 1] = table->cols.size();
  }
  detail::hint_huge_pages(table->buckets.data(),
                          table->buckets.size() * sizeof(TransitionTable::Bucket));
  return table;
}

/// Table from explicit transition probabilities, validated against the
/// termination policy's expected row mass.
std::shared_ptr<TransitionTable> build_table_from_probabilities(
    const Matrix& p, const Termination& term) {
  if (p.rows() != p.cols()) {
    throw config_error("transition matrix must be square");
  }
  const std::size_t n = p.rows();
  const double kill = kill_mass(term);
  const bool weight_cutoff = std::holds_alternative<WeightCutoff>(term);

  auto table = std::make_shared<TransitionTable>();
  table->states = n;
  table->survival.assign(n, 0.0);
  table->dense_rows = p.is_dense();
  if (!table->dense_rows) {
    table->offsets.assign(n + 1, 0);
    table->cols.reserve(p.stored_entries());
    table->mass.reserve(p.stored_entries());
  } else {
    table->mass.assign(n * n, 0.0);
    table->buckets.assign(n * n, {});
  }

  AliasScratch scratch;
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    std::size_t begin = table->dense_rows ? i * n : table->cols.size();
    p.for_each_in_row(i, [&](std::size_t j, double v) {
      if (v < 0.0) {
        throw config_error("transition probabilities must be non-negative");
      }
      if (table->dense_rows) {
        table->mass[i * n + j] = v;
      } else if (v > 0.0) {
        table->cols.push_back(j);
        table->mass.push_back(v);
      }
      total += v;
    });
    if (!table->dense_rows) table->buckets.resize(table->cols.size());

    if (total > kRowSumTolerance) {
      const double expected = 1.0 - kill;
      if (weight_cutoff) {
        if (total > 1.0 + kRowSumTolerance) {
          throw config_error("transition row " + std::to_string(i) +
                             " sums to " + std::to_string(total) +
                             " (> 1); rows must be (sub-)stochastic");
        }
      } else if (std::abs(total - expected) > kRowSumTolerance) {
        throw config_error("transition row " + std::to_string(i) + " sums to " +
                           std::to_string(total) + ", expected " +
                           std::to_string(expected) +
                           " under the chosen termination policy");
      }
      std::size_t end = table->dense_rows ? i * n + n : table->cols.size();
      normalize_row_mass(table->mass, begin, end, total);
      build_row_buckets(table->mass, begin, end, table->buckets, scratch);
      table->survival[i] = std::min(total, 1.0);
    }
    if (!table->dense_rows) table->offsets[i + 1] = table->cols.size();
  }
  detail::hint_huge_pages(table->buckets.data(),
                          table->buckets.size() * sizeof(TransitionTable::Bucket));
  return table;
}

Vector normalized_probabilities(Vector v, const char* what) {
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw config_error(std::string(what) + " must be non-negative and finite");
    }
    total += x;
  }
  if (total <= 0.0) {
    throw config_error(std::string(what) + " must have positive total mass");
  }
  for (double& x : v) x /= total;
  return v;
}

Vector cdf_of(const Vector& probs) {
  Vector cdf(probs.size());
  double run = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    run += probs[i];
    cdf[i] = run;
  }
  cdf.back() = 1.0;
  return cdf;
}

}  // namespace

// -- ChainKernel -------------------------------------------------------------

ChainKernel::ChainKernel(std::shared_ptr<const TransitionTable> table,
                         Vector initial, Termination term)
    : table_(std::move(table)),
      initial_(normalized_probabilities(std::move(initial), "initial distribution")),
      term_(std::move(term)) {
  if (initial_.size() != table_->states) {
    throw config_error("initial distribution length does not match state count");
  }
  double sum_check = 0.0;
  for (double x : initial_) sum_check += x;
  if (std::abs(sum_check - 1.0) > kRowSumTolerance) {
    throw config_error("initial distribution failed to normalize");
  }
  initial_cdf_ = cdf_of(initial_);
}

ChainKernel::ChainKernel(Vector initial, const Matrix& transition, Termination term)
    : ChainKernel(build_table_from_probabilities(transition, term),
                  std::move(initial), term) {}

ChainKernel ChainKernel::with_initial(Vector initial) const {
  return ChainKernel(table_, std::move(initial), term_);
}

std::size_t ChainKernel::sample_initial(double u) const {
  return cdf_find(initial_cdf_.data(), initial_cdf_.size(), u);
}

ChainKernel kernel_from_operator(const Matrix& h, const Vector& support,
                                 WalkMode mode, Termination term) {
  if (h.rows() != h.cols()) {
    throw config_error("operator must be square");
  }
  ensure_size(support, h.rows(), "support vector");

  const double kill = kill_mass(term);
  cutoff_of(term);  // validates epsilon when applicable

  Matrix walk_matrix = mode == WalkMode::Forward ? h : h.transposed();
  auto table = build_table_from_operator(walk_matrix, 1.0 - kill);
  table->source_id = h.storage_id();
  table->source_mode = mode;

  Vector p(support.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::abs(support[i]);
  return ChainKernel(std::move(table), std::move(p), std::move(term));
}

// -- estimators ---------------------------------------------------------------

namespace {

void check_initial_support(const Vector& weight_vec, const ChainKernel& kernel,
                           const char* what) {
  for (std::size_t i = 0; i < weight_vec.size(); ++i) {
    if (weight_vec[i] != 0.0 && kernel.initial_prob(i) <= 0.0) {
      throw config_error(std::string(what) +
                         " has support outside the initial distribution "
                         "(component " +
                         std::to_string(i) + ")");
    }
  }
}

/// One-time O(nnz log m) coverage scan for kernels not derived from the
/// operator: every H(i, j) != 0 must have P(i -> j) > 0 (forward), every
/// H(j, i) != 0 must have P(i -> j) > 0 (adjoint).
void check_transition_support(const Matrix& h, const ChainKernel& kernel,
                              WalkMode mode) {
  const TransitionTable& table = kernel.table();
  for (std::size_t r = 0; r < h.rows(); ++r) {
    h.for_each_in_row(r, [&](std::size_t c, double v) {
      if (v == 0.0) return;
      std::size_t from = mode == WalkMode::Forward ? r : c;
      std::size_t to = mode == WalkMode::Forward ? c : r;
      if (table.prob(from, to) <= 0.0) {
        throw config_error("transition kernel misses operator support (" +
                           std::to_string(from) + " -> " + std::to_string(to) +
                           ")");
      }
    });
  }
}

void check_config(const FixedPointSystem& fp, const WalkConfig& config,
                  WalkMode mode) {
  if (config.kernel.states() != fp.size()) {
    throw config_error("kernel state count does not match the system");
  }
  if (config.n_walks == 0) {
    throw config_error("need at least one walk");
  }
  if (const auto* f = std::get_if<FixedLength>(&config.kernel.termination())) {
    if (f->length > config.max_steps) {
      throw config_error("fixed walk length exceeds max_steps");
    }
  }
  if (!config.kernel.built_from(fp.h, mode)) {
    check_transition_support(fp.h, config.kernel, mode);
  }
}

std::optional<double> bias_bound(const FixedPointSystem& fp,
                                 const Termination& term, double h_vec_norm1) {
  if (!fp.rho || !(*fp.rho < 1.0)) return std::nullopt;
  const double rho = *fp.rho;
  const double tail = rho / (1.0 - rho) * norm_inf(fp.c);
  if (const auto* f = std::get_if<FixedLength>(&term)) {
    // sum_{l > L} rho^l ||c|| = rho^{L+1} / (1 - rho) ||c||
    return h_vec_norm1 * std::pow(rho, static_cast<double>(f->length)) * tail;
  }
  if (const auto* w = std::get_if<WeightCutoff>(&term)) {
    // each walk stops carrying less than epsilon of weight
    return w->epsilon * tail;
  }
  return std::nullopt;  // killing-based walks are unbiased
}

/// Step cap actually applied: under WeightCutoff with a known contraction
/// factor, walks that somehow dodge the cutoff are cut at ten times the
/// number of steps the cutoff should need (10 * ceil(log eps / log rho)).
std::size_t effective_step_cap(const FixedPointSystem& fp, const Termination& term,
                               std::size_t max_steps) {
  const auto* w = std::get_if<WeightCutoff>(&term);
  if (w && fp.rho && *fp.rho > 0.0 && *fp.rho < 1.0 && w->epsilon < 1.0) {
    double derived = 10.0 * std::ceil(std::log(w->epsilon) / std::log(*fp.rho));
    if (derived >= 1.0 && derived < static_cast<double>(max_steps)) {
      return static_cast<std::size_t>(derived);
    }
  }
  return max_steps;
}

void append_radius_warning(const FixedPointSystem& fp, EstimateReport& report) {
  if (fp.rho && *fp.rho > kSpectralRadiusGate) {
    report.warnings.push_back(
        "estimated spectral radius " + std::to_string(*fp.rho) +
        " exceeds " + std::to_string(kSpectralRadiusGate) +
        "; the Neumann series may not converge");
  }
}

struct ScalarAccum {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t steps = 0;
  std::size_t truncated = 0;
};

struct ForwardPlan {
  const Matrix* h;
  const Vector* c;
  const Vector* h_vec;
  const ChainKernel* kernel;
  std::size_t max_steps;
  double cutoff;        // 0 unless WeightCutoff
  bool fixed_length;
  std::size_t length;   // FixedLength only
};

/// Runs walks [begin, end) of the forward collision estimator and
/// accumulates their scores into `acc` in index order.
///
/// Walks advance in a lockstep group, one phase at a time: first every
/// lane's uniform draw (pure compute), then every lane's bucket pick, then
/// every lane's weight update. Within a phase the lanes' table reads are
/// independent and issue back to back, so the group overlaps its memory
/// latency instead of each walk stalling on its own lookup; together with
/// the one-bucket alias sampling this keeps the per-step cost flat as the
/// state count grows. Each walk still sees the serial draw addressing and
/// operation order, and per-walk scores are folded into the block sums in
/// walk order, so the result is bitwise identical to a one-walk-at-a-time
/// loop.
void run_forward_walks(const ForwardPlan& plan, const RandomStream& stream,
                       std::size_t begin, std::size_t end, ScalarAccum& acc) {
  const Matrix& h = *plan.h;
  const Vector& c = *plan.c;
  const Vector& h_vec = *plan.h_vec;
  const ChainKernel& kernel = *plan.kernel;
  const TransitionTable& tbl = kernel.table();
  const TransitionTable::Bucket* buckets = tbl.buckets.data();

  std::array<double, kReductionBlock> scores;
  constexpr std::size_t kLanes = 32;
  // Persistent walk state per lane.
  std::size_t lane_walk[kLanes];
  std::size_t lane_state[kLanes];
  double lane_weight[kLanes];
  double lane_score[kLanes];
  std::size_t lane_step[kLanes];
  // Per-sweep scratch.
  bool lane_dead[kLanes];
  double lane_u[kLanes];
  double lane_frac[kLanes];
  double lane_survival[kLanes];
  const TransitionTable::Bucket* lane_bucket[kLanes];
  std::size_t lane_bin[kLanes];
  std::size_t lane_row_begin[kLanes];

  std::size_t next = begin;
  std::size_t active = 0;

  // Starts walks until one survives its initial draw or the range runs out;
  // zero-weight starts score their first term and end immediately.
  auto refill = [&](std::size_t k) {
    while (next < end) {
      const std::size_t w = next++;
      const std::size_t state = kernel.sample_initial(stream.uniform(w, 0));
      const double weight = h_vec[state] / kernel.initial_prob(state);
      scores[w - begin] = weight * c[state];
      if (weight == 0.0) continue;
      lane_walk[k] = w;
      lane_state[k] = state;
      lane_weight[k] = weight;
      lane_score[k] = scores[w - begin];
      lane_step[k] = 1;
      return true;
    }
    return false;
  };

  while (active < kLanes && refill(active)) ++active;

  while (active > 0) {
    // Termination checks and uniform draws; the draws are independent
    // compute chains with no loads between them.
    for (std::size_t k = 0; k < active; ++k) {
      const std::size_t l = lane_step[k];
      if (plan.fixed_length && l > plan.length) {
        lane_dead[k] = true;
        continue;
      }
      if (l > plan.max_steps) {
        ++acc.truncated;
        lane_dead[k] = true;
        continue;
      }
      lane_dead[k] = false;
      lane_u[k] =
          stream.uniform(lane_walk[k], static_cast<std::uint32_t>(l));
    }

    // Kill/absorb tests and bucket addressing (hot per-row arrays only);
    // the bucket itself is only prefetched here, not waited on.
    for (std::size_t k = 0; k < active; ++k) {
      if (lane_dead[k]) continue;
      const double s = tbl.survival[lane_state[k]];
      if (s <= 0.0 || lane_u[k] >= s) {  // absorbed or killed
        lane_dead[k] = true;
        continue;
      }
      double v = lane_u[k] / s;
      // u < s guarantees v < 1 in exact arithmetic; rounding can still land
      // on 1.0, which would walk off the bucket row.
      if (v >= 1.0) v = 0x1.fffffffffffffp-1;
      lane_survival[k] = s;
      std::size_t row_begin, n;
      if (tbl.dense_rows) {
        row_begin = lane_state[k] * tbl.states;
        n = tbl.states;
      } else {
        row_begin = tbl.offsets[lane_state[k]];
        n = tbl.offsets[lane_state[k] + 1] - row_begin;
      }
      const double x = v * static_cast<double>(n);
      std::size_t j = static_cast<std::size_t>(x);
      if (j >= n) j = n - 1;  // v*n can round up to n
      lane_frac[k] = x - static_cast<double>(j);
      lane_bin[k] = j;
      lane_row_begin[k] = row_begin;
      lane_bucket[k] = buckets + row_begin + j;
      __builtin_prefetch(lane_bucket[k]);
    }

    // Bucket reads and weight updates; the bucket and h lookups of the
    // group are independent across lanes.
    for (std::size_t k = 0; k < active; ++k) {
      if (lane_dead[k]) continue;
      const TransitionTable::Bucket& b = *lane_bucket[k];
      const bool self = lane_frac[k] < b.threshold;
      const std::size_t bin =
          self ? lane_bin[k] : static_cast<std::size_t>(b.alias);
      const double mass = self ? b.mass_self : b.mass_alias;
      if (!(mass > 0.0)) {  // threshold round-off; measure-zero, absorb
        lane_dead[k] = true;
        continue;
      }
      const std::size_t col =
          tbl.dense_rows ? bin : tbl.cols[lane_row_begin[k] + bin];
      lane_weight[k] *=
          h.at(lane_state[k], col) / (mass * lane_survival[k]);
      lane_state[k] = col;
      if (lane_weight[k] == 0.0 ||
          (plan.cutoff > 0.0 && std::abs(lane_weight[k]) < plan.cutoff)) {
        lane_dead[k] = true;
      } else {
        lane_score[k] += lane_weight[k] * c[lane_state[k]];
        ++acc.steps;
        ++lane_step[k];
      }
    }

    // Retire finished walks; every lane has had its turn this sweep, so a
    // tail lane (dead or not) can slide into any freed slot.
    for (std::size_t k = 0; k < active;) {
      if (!lane_dead[k]) {
        ++k;
        continue;
      }
      scores[lane_walk[k] - begin] = lane_score[k];
      if (refill(k)) {
        lane_dead[k] = false;
        ++k;
        continue;
      }
      --active;
      if (k < active) {
        lane_walk[k] = lane_walk[active];
        lane_state[k] = lane_state[active];
        lane_weight[k] = lane_weight[active];
        lane_score[k] = lane_score[active];
        lane_step[k] = lane_step[active];
        lane_dead[k] = lane_dead[active];
      }
    }
  }

  for (std::size_t w = begin; w < end; ++w) {
    const double score = scores[w - begin];
    acc.sum += score;
    acc.sum_sq += score * score;
  }
}

void finalize_scalar(const std::vector<ScalarAccum>& blocks, std::size_t n_walks,
                     double& mean, double& variance, std::uint64_t& steps,
                     std::size_t& truncated) {
  double sum = 0.0, sum_sq = 0.0;
  for (const ScalarAccum& b : blocks) {  // fixed block order
    sum += b.sum;
    sum_sq += b.sum_sq;
    steps += b.steps;
    truncated += b.truncated;
  }
  const double n = static_cast<double>(n_walks);
  mean = sum / n;
  variance = n_walks > 1 ? std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0))
                         : 0.0;
}

}  // namespace

EstimateReport forward_estimate(const FixedPointSystem& fp, const Vector& h_vec,
                                const WalkConfig& config) {
  ensure_size(h_vec, fp.size(), "functional vector");
  ensure_finite(h_vec, "functional vector");
  check_config(fp, config, WalkMode::Forward);
  check_initial_support(h_vec, config.kernel, "functional vector");

  ForwardPlan plan{&fp.h,
                   &fp.c,
                   &h_vec,
                   &config.kernel,
                   effective_step_cap(fp, config.kernel.termination(), config.max_steps),
                   cutoff_of(config.kernel.termination()),
                   std::holds_alternative<FixedLength>(config.kernel.termination()),
                   0};
  if (plan.fixed_length) {
    plan.length = std::get<FixedLength>(config.kernel.termination()).length;
  }

  RandomStream stream(config.seed, kDomainWalk, config.stream_tag);
  std::vector<ScalarAccum> blocks(block_count(config.n_walks));
  run_blocks(config.n_walks, config.threads,
             [&](std::size_t b, std::size_t begin, std::size_t end) {
               run_forward_walks(plan, stream, begin, end, blocks[b]);
             });

  EstimateReport report;
  report.n_walks = config.n_walks;
  double mean = 0.0, variance = 0.0;
  std::uint64_t steps = 0;
  finalize_scalar(blocks, config.n_walks, mean, variance, steps,
                  report.truncated_walks);
  report.estimate = {mean};
  report.sample_variance = {variance};
  report.total_steps = static_cast<std::size_t>(steps);
  report.mean_walk_length =
      static_cast<double>(steps) / static_cast<double>(config.n_walks);
  report.truncation_bias_bound =
      bias_bound(fp, config.kernel.termination(), norm1(h_vec));
  append_radius_warning(fp, report);
  return report;
}

EstimateReport forward_estimate_components(const FixedPointSystem& fp,
                                           const std::vector<std::size_t>& components,
                                           const WalkConfig& config) {
  if (components.empty()) {
    throw config_error("no components requested");
  }
  for (std::size_t c : components) {
    if (c >= fp.size()) {
      throw config_error("component index " + std::to_string(c) +
                         " out of range");
    }
  }
  check_config(fp, config, WalkMode::Forward);

  EstimateReport report;
  report.n_walks = config.n_walks;
  report.estimate.resize(components.size());
  report.sample_variance.resize(components.size());

  Vector unit(fp.size(), 0.0);
  std::uint64_t steps_total = 0;
  for (std::size_t o = 0; o < components.size(); ++o) {
    const std::size_t comp = components[o];
    unit[comp] = 1.0;
    ChainKernel pinned = config.kernel.with_initial(unit);

    ForwardPlan plan{&fp.h,
                     &fp.c,
                     &unit,
                     &pinned,
                     effective_step_cap(fp, config.kernel.termination(), config.max_steps),
                     cutoff_of(config.kernel.termination()),
                     std::holds_alternative<FixedLength>(config.kernel.termination()),
                     0};
    if (plan.fixed_length) {
      plan.length = std::get<FixedLength>(config.kernel.termination()).length;
    }

    RandomStream stream(config.seed, kDomainWalk,
                        config.stream_tag + static_cast<std::uint32_t>(o));
    std::vector<ScalarAccum> blocks(block_count(config.n_walks));
    run_blocks(config.n_walks, config.threads,
               [&](std::size_t b, std::size_t begin, std::size_t end) {
                 run_forward_walks(plan, stream, begin, end, blocks[b]);
               });

    std::uint64_t steps = 0;
    finalize_scalar(blocks, config.n_walks, report.estimate[o],
                    report.sample_variance[o], steps, report.truncated_walks);
    steps_total += steps;
    unit[comp] = 0.0;
  }

  report.total_steps = static_cast<std::size_t>(steps_total);
  report.mean_walk_length =
      static_cast<double>(steps_total) /
      (static_cast<double>(config.n_walks) * static_cast<double>(components.size()));
  report.truncation_bias_bound = bias_bound(fp, config.kernel.termination(), 1.0);
  append_radius_warning(fp, report);
  return report;
}

namespace {

struct AdjointBlock {
  Vector sum;
  Vector sum_sq;
  std::uint64_t steps = 0;
  std::size_t truncated = 0;

  void reset(std::size_t n) {
    sum.assign(n, 0.0);
    sum_sq.assign(n, 0.0);
    steps = 0;
    truncated = 0;
  }
};

/// Deposits of one adjoint walk, merged per visited state.
void run_adjoint_walks(const FixedPointSystem& fp, const ChainKernel& kernel,
                       const RandomStream& stream, std::size_t begin,
                       std::size_t end, std::size_t max_steps, double cutoff,
                       bool fixed_length, std::size_t length,
                       AdjointBlock& acc,
                       std::vector<std::pair<std::size_t, double>>& scratch) {
  const Matrix& h = fp.h;
  for (std::size_t w = begin; w < end; ++w) {
    scratch.clear();
    std::size_t state = kernel.sample_initial(stream.uniform(w, 0));
    double weight = fp.c[state] / kernel.initial_prob(state);
    scratch.emplace_back(state, weight);

    if (weight != 0.0) {
      for (std::size_t l = 1;; ++l) {
        if (fixed_length && l > length) break;
        if (l > max_steps) {
          ++acc.truncated;
          break;
        }
        auto step = kernel.sample_step(state, stream.uniform(w, static_cast<std::uint32_t>(l)));
        if (!step) break;
        weight *= h.at(step->first, state) / step->second;
        state = step->first;
        if (weight == 0.0) break;
        if (cutoff > 0.0 && std::abs(weight) < cutoff) break;
        scratch.emplace_back(state, weight);
        ++acc.steps;
      }
    }

    // merge repeat visits so per-walk squares are correct
    std::sort(scratch.begin(), scratch.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < scratch.size();) {
      std::size_t j = i;
      double v = 0.0;
      while (j < scratch.size() && scratch[j].first == scratch[i].first) {
        v += scratch[j].second;
        ++j;
      }
      acc.sum[scratch[i].first] += v;
      acc.sum_sq[scratch[i].first] += v * v;
      i = j;
    }
  }
}

}  // namespace

EstimateReport adjoint_estimate(const FixedPointSystem& fp,
                                const WalkConfig& config) {
  check_config(fp, config, WalkMode::Adjoint);
  check_initial_support(fp.c, config.kernel, "fixed-point constant");

  const std::size_t n = fp.size();
  const double cutoff = cutoff_of(config.kernel.termination());
  const std::size_t step_cap =
      effective_step_cap(fp, config.kernel.termination(), config.max_steps);
  const bool fixed_length =
      std::holds_alternative<FixedLength>(config.kernel.termination());
  const std::size_t length =
      fixed_length ? std::get<FixedLength>(config.kernel.termination()).length : 0;

  RandomStream stream(config.seed, kDomainWalk, config.stream_tag);

  // Blocks are processed in bounded groups so the per-block accumulators
  // stay small; groups and blocks are combined strictly in index order.
  constexpr std::size_t kGroupBlocks = 128;
  const std::size_t group_walks = kGroupBlocks * kReductionBlock;

  Vector sum(n, 0.0), sum_sq(n, 0.0);
  std::uint64_t steps = 0;
  std::size_t truncated = 0;

  std::vector<AdjointBlock> group(
      std::min(kGroupBlocks, block_count(config.n_walks)));
  std::vector<std::vector<std::pair<std::size_t, double>>> scratch(group.size());

  for (std::size_t w0 = 0; w0 < config.n_walks; w0 += group_walks) {
    const std::size_t todo = std::min(group_walks, config.n_walks - w0);
    const std::size_t blocks_here = block_count(todo);
    for (std::size_t b = 0; b < blocks_here; ++b) group[b].reset(n);

    run_blocks(todo, config.threads,
               [&](std::size_t b, std::size_t begin, std::size_t end) {
                 run_adjoint_walks(fp, config.kernel, stream, w0 + begin,
                                   w0 + end, step_cap, cutoff,
                                   fixed_length, length, group[b], scratch[b]);
               });

    for (std::size_t b = 0; b < blocks_here; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        sum[i] += group[b].sum[i];
        sum_sq[i] += group[b].sum_sq[i];
      }
      steps += group[b].steps;
      truncated += group[b].truncated;
    }
  }

  EstimateReport report;
  report.n_walks = config.n_walks;
  report.estimate.resize(n);
  report.sample_variance.resize(n);
  const double nw = static_cast<double>(config.n_walks);
  for (std::size_t i = 0; i < n; ++i) {
    report.estimate[i] = sum[i] / nw;
    report.sample_variance[i] =
        config.n_walks > 1
            ? std::max(0.0, (sum_sq[i] - sum[i] * sum[i] / nw) / (nw - 1.0))
            : 0.0;
  }
  report.total_steps = static_cast<std::size_t>(steps);
  report.mean_walk_length = static_cast<double>(steps) / nw;
  report.truncated_walks = truncated;
  report.truncation_bias_bound = bias_bound(fp, config.kernel.termination(), 1.0);
  append_radius_warning(fp, report);
  return report;
}

void write_estimate_csv(const std::string& path, const EstimateReport& report,
                        const std::vector<long long>& component_ids) {
  if (component_ids.size() != report.estimate.size()) {
    throw config_error("component label count does not match estimates");
  }
  ensure_parent_directory(path);
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  out << "component,estimate,variance,n_walks\n";
  for (std::size_t i = 0; i < report.estimate.size(); ++i) {
    out << component_ids[i] << "," << format_double(report.estimate[i]) << ","
        << format_double(report.sample_variance[i]) << "," << report.n_walks
        << "\n";
  }
  if (!out) throw config_error("write failed for " + path);
}

}  // namespace mcsolve
