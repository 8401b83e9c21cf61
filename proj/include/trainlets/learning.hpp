#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "trainlets/error.hpp"
#include "trainlets/pursuit.hpp"
#include "trainlets/sparse_dictionary.hpp"
#include "trainlets/sparse_vec.hpp"
#include "trainlets/types.hpp"

namespace trainlets {

struct TrainerConfig {
  Index atom_sparsity = 10;  // k: non-zeros per column of A
  Index code_sparsity = 4;   // p: non-zeros per example code
  Index batch_size = 512;    // N
  int epochs = 1;
  double momentum = 0.5;        // gamma in [0, 1]
  double rate_decay = 0.0;      // T in 1/(1 + t/T); <= 0 selects 10 epochs' worth of batches
  double backtrack = 0.5;       // c in (0, 1)
  int maintenance_period = 10;  // batches between replace/prune passes; 0 disables
  double prune_coherence = 0.99;
  Index unused_threshold = 1;  // atoms used fewer times than this in a window are replaced
  std::uint64_t seed = 0;
  int niht_iterations = 1;    // NIHT steps per drawn sample (stochastic NIHT)
  int batch_iterations = 10;  // outer iterations of batch learning
  int atom_iterations = 50;   // cap on NIHT steps per atom (batch learning)

  void validate() const {
    const auto bad = [](const char* what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (atom_sparsity < 1) bad("atom sparsity must be >= 1");
    if (code_sparsity < 1) bad("code sparsity must be >= 1");
    if (batch_size < 1) bad("mini-batch size must be >= 1");
    if (epochs < 1) bad("epochs must be >= 1");
    if (!(momentum >= 0.0 && momentum <= 1.0)) bad("momentum must lie in [0, 1]");
    if (!(backtrack > 0.0 && backtrack < 1.0)) bad("backtrack factor must lie in (0, 1)");
    if (maintenance_period < 0) bad("maintenance period must be >= 0");
    if (!(prune_coherence > 0.0 && prune_coherence <= 1.0)) bad("prune coherence must lie in (0, 1]");
    if (unused_threshold < 0) bad("unused threshold must be >= 0");
    if (niht_iterations < 1 || batch_iterations < 1 || atom_iterations < 1) bad("iteration counts must be >= 1");
  }
};

/// (example, value) pairs of one row of X.
using CodeRow = std::vector<std::pair<Index, double>>;

// ---------------------------------------------------------------------------
// Objective and gradient

/// Y - D X, one column per example.
inline Matrix residual_matrix(const SparseDictionary& sd, const Matrix& y, const SparseCodeMatrix& x) {
  detail::require(y.rows() == sd.signal_dim() && y.cols() == x.examples() && x.dim == sd.atom_count(),
                  ErrorCode::DimensionMismatch, "Y, X and D disagree");
  Matrix r = y;
  for (Index i = 0; i < y.cols(); ++i) {
    const SparseVec& c = x.codes[static_cast<std::size_t>(i)];
    if (!c.empty()) r.col(i) -= sd.apply(c);
  }
  return r;
}

/// f(A) = 1/2 ||Y - Phi A X||_F^2.
inline double objective(const SparseDictionary& sd, const Matrix& y, const SparseCodeMatrix& x) {
  return 0.5 * residual_matrix(sd, y, x).squaredNorm();
}

/// Columns S of grad f(A) = -Phi^T (Y - Phi A X) X^T, as a dense
/// (base coefficients) x |S| block.
inline Matrix grad_dict(const SparseDictionary& sd, const Matrix& y, const SparseCodeMatrix& x,
                        std::span<const Index> atoms) {
  const Matrix r = residual_matrix(sd, y, x);
  const auto rows = x.rows();
  Matrix g(sd.coeff_dim(), static_cast<Index>(atoms.size()));
  for (std::size_t s = 0; s < atoms.size(); ++s) {
    const Index j = atoms[s];
    detail::require(j >= 0 && j < sd.atom_count(), ErrorCode::DimensionMismatch, "atom index out of range");
    Vector rj = Vector::Zero(sd.signal_dim());
    for (const auto& [e, v] : rows[static_cast<std::size_t>(j)]) rj += v * r.col(e);
    g.col(static_cast<Index>(s)) = -sd.base().adjoint(rj);
  }
  return g;
}

// ---------------------------------------------------------------------------
// NIHT atom update

enum class NihtStatus {
  Accepted,
  Stationary,     // zero gradient or no decrease possible; atom unchanged
  ZeroUsage,      // atom not used by any example; skipped
  StepUnderflow,  // backtracking shrank the step below 1e-12 of its start; atom unchanged
};

struct NihtResult {
  SparseVec atom;
  NihtStatus status = NihtStatus::Accepted;
  double step = 0.0;          // accepted step
  double optimal_step = 0.0;  // support-restricted step before scaling/backtracking
  double cost_before = 0.0;   // up to the constant 1/2 ||E_j||^2
  double cost_after = 0.0;
  int backtracks = 0;
};

/// Per-atom quadratic 1/2 ||E - Phi a x^T||^2 expressed through e = E x and
/// s = ||x||^2: q(a) = -<Phi a, e> + s/2 ||Phi a||^2 (constant term dropped).
struct AtomProblem {
  const SeparableBase* base = nullptr;
  Vector e;
  double s = 0.0;

  double cost(const SparseVec& a) const {
    const Vector pa = base->apply(a);
    return -pa.dot(e) + 0.5 * s * pa.squaredNorm();
  }
  Vector gradient(const SparseVec& a) const { return base->adjoint(s * base->apply(a) - e); }
};

inline AtomProblem make_atom_problem(const SeparableBase& base, const Matrix& ej, const Vector& xj) {
  detail::require(ej.rows() == base.signal_dim() && ej.cols() == xj.size(), ErrorCode::DimensionMismatch,
                  "E_j and x_j disagree");
  return AtomProblem{&base, ej * xj, xj.squaredNorm()};
}

namespace detail {

inline SparseVec restrict_to(const Vector& v, const std::vector<Index>& support) {
  SparseVec out(v.size());
  for (Index i : support) {
    if (v[i] == 0.0) continue;
    out.support.push_back(i);
    out.values.push_back(v[i]);
  }
  return out;
}

}  // namespace detail

/// One accepted NIHT step on a single atom. The step is the exact minimizer
/// along the gradient restricted to the current support, scaled by
/// `step_scale` (<= 1). When hard thresholding changes the support, the step
/// is multiplied by `backtrack` until the cost does not increase. The
/// returned atom never has a higher cost than the input.
inline NihtResult niht_atom_step(const AtomProblem& prob, const SparseVec& a, Index k, double backtrack,
                                 double step_scale = 1.0) {
  NihtResult res;
  res.atom = a;
  if (!(prob.s > 0.0)) {
    res.status = NihtStatus::ZeroUsage;
    return res;
  }
  const SeparableBase& base = *prob.base;
  res.cost_before = prob.cost(a);
  res.cost_after = res.cost_before;

  const Vector g = prob.gradient(a);
  if (g.squaredNorm() == 0.0) {
    res.status = NihtStatus::Stationary;
    return res;
  }
  SparseVec g_s = detail::restrict_to(g, a.support);
  if (g_s.empty()) g_s = SparseVec::from_dense(g);
  const double num = g_s.squared_norm();
  const double den = prob.s * base.apply(g_s).squaredNorm();
  if (!(den > 0.0)) {
    res.status = NihtStatus::Stationary;
    return res;
  }
  res.optimal_step = num / den;
  double eta = res.optimal_step * step_scale;
  const double eta0 = eta;
  const Vector a_dense = a.to_dense();

  while (true) {
    const SparseVec cand = hard_threshold(Vector(a_dense - eta * g), k);
    const bool same_support = cand.support == a.support;
    const double c = prob.cost(cand);
    if (c <= res.cost_before) {
      res.atom = cand;
      res.cost_after = c;
      res.step = eta;
      res.status = NihtStatus::Accepted;
      return res;
    }
    if (same_support) {
      // Exact line minimum did not decrease the cost: only round-off left.
      res.status = NihtStatus::Stationary;
      return res;
    }
    eta *= backtrack;
    ++res.backtracks;
    if (eta < 1e-12 * eta0) {
      res.status = NihtStatus::StepUnderflow;
      return res;
    }
  }
}

/// NIHT step on atom j given its error matrix E_j = Y - sum_{i != j} Phi a_i x_i^T
/// and the dense row x_j of X.
inline NihtResult atom_update_niht(const Matrix& ej, const SeparableBase& base, const SparseVec& aj, const Vector& xj,
                                   Index k, double backtrack = 0.5) {
  const AtomProblem prob = make_atom_problem(base, ej, xj);
  NihtResult r = niht_atom_step(prob, aj, k, backtrack);
  const double constant = 0.5 * ej.squaredNorm();
  r.cost_before += constant;
  r.cost_after += constant;
  return r;
}

// ---------------------------------------------------------------------------
// Batch learning

struct BatchLearnResult {
  SparseDictionary dict;
  SparseCodeMatrix codes;
  /// Objective before any coding (X = 0), then after every coding and every
  /// dictionary-update half-step.
  std::vector<double> cost_history;
};

namespace detail {

// Least-squares code of y on a fixed support of the effective dictionary.
inline SparseVec refit_on_support(const SparseDictionary& sd, const Vector& y, const std::vector<Index>& support) {
  SparseVec out(sd.atom_count());
  if (support.empty()) return out;
  Matrix cols(sd.signal_dim(), static_cast<Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) cols.col(static_cast<Index>(i)) = sd.column(support[i]);
  const Vector z = cols.colPivHouseholderQr().solve(y);
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (z[static_cast<Index>(i)] == 0.0) continue;
    out.support.push_back(support[i]);
    out.values.push_back(z[static_cast<Index>(i)]);
  }
  return out;
}

inline void scale_row(SparseCodeMatrix& x, const CodeRow& row, Index atom, double factor) {
  for (const auto& [e, v] : row) {
    (void)v;
    SparseVec& c = x.codes[static_cast<std::size_t>(e)];
    const auto it = std::lower_bound(c.support.begin(), c.support.end(), atom);
    c.values[static_cast<std::size_t>(it - c.support.begin())] *= factor;
  }
}

}  // namespace detail

/// Alternates OMP coding (keeping, per example, the better of the new code and
/// a refit on the previous support) with a sweep of NIHT updates over all
/// atoms, each iterated to convergence. The objective never increases.
inline BatchLearnResult batch_learn(const Matrix& y, SparseDictionary a0, const TrainerConfig& cfg) {
  cfg.validate();
  detail::require(y.cols() >= 1 && y.rows() == a0.signal_dim(), ErrorCode::DimensionMismatch,
                  "training matrix does not match the dictionary");
  BatchLearnResult out{std::move(a0), {}, {}};
  SparseDictionary& sd = out.dict;
  SparseCodeMatrix& x = out.codes;
  const Index m = sd.atom_count();
  const Index count = y.cols();
  x.dim = m;
  x.codes.assign(static_cast<std::size_t>(count), SparseVec(m));
  out.cost_history.push_back(0.5 * y.squaredNorm());

  for (int it = 0; it < cfg.batch_iterations; ++it) {
    // Sparse coding stage.
    for (Index i = 0; i < count; ++i) {
      const Vector yi = y.col(i);
      SparseVec fresh = omp(sd, yi, PursuitOptions{cfg.code_sparsity, 0.0});
      SparseVec prev = detail::refit_on_support(sd, yi, x.codes[static_cast<std::size_t>(i)].support);
      const double e_fresh = (yi - sd.apply(fresh)).squaredNorm();
      const double e_prev = (yi - sd.apply(prev)).squaredNorm();
      x.codes[static_cast<std::size_t>(i)] = e_fresh <= e_prev ? std::move(fresh) : std::move(prev);
    }
    out.cost_history.push_back(objective(sd, y, x));

    // Dictionary update stage.
    Matrix r = residual_matrix(sd, y, x);
    const auto rows = x.rows();
    for (Index j = 0; j < m; ++j) {
      const CodeRow& row = rows[static_cast<std::size_t>(j)];
      if (row.empty()) continue;
      const SparseVec a_old = sd.coeffs(j);
      const Vector pa_old = sd.base().apply(a_old);
      AtomProblem prob{&sd.base(), Vector::Zero(sd.signal_dim()), 0.0};
      for (const auto& [e, v] : row) {
        prob.e += v * r.col(e);
        prob.s += v * v;
      }
      prob.e += prob.s * pa_old;

      SparseVec a = a_old;
      for (int step = 0; step < cfg.atom_iterations; ++step) {
        const NihtResult res = niht_atom_step(prob, a, sd.atom_sparsity(), cfg.backtrack);
        if (res.status != NihtStatus::Accepted) break;
        a = res.atom;
        if (res.cost_before - res.cost_after <= 1e-14 * std::max(1.0, std::abs(res.cost_before))) break;
      }
      if (a.empty()) continue;
      sd.set_coeffs(j, a);
      const Vector delta = sd.base().apply(a) - pa_old;
      for (const auto& [e, v] : row) r.col(e) -= v * delta;
      const double nrm = sd.renormalize(j);
      detail::scale_row(x, row, j, nrm);
    }
    out.cost_history.push_back(objective(sd, y, x));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample streams

/// Cycles through the columns of a sample matrix for a fixed number of
/// epochs, reshuffling at the start of each epoch.
class ShuffledSampleStream {
 public:
  ShuffledSampleStream(const Matrix& samples, int epochs, std::uint64_t seed)
      : samples_(&samples), epochs_(epochs), rng_(seed), order_(static_cast<std::size_t>(samples.cols())) {
    std::iota(order_.begin(), order_.end(), Index{0});
    cursor_ = order_.size();
  }

  Index dim() const noexcept { return samples_->rows(); }
  Index size() const noexcept { return samples_->cols(); }

  /// Next sample index, or nullopt once every epoch is exhausted.
  std::optional<Index> next_index() {
    if (cursor_ == order_.size()) {
      if (epoch_ == epochs_ || order_.empty()) return std::nullopt;
      ++epoch_;
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

  std::optional<Vector> next() {
    const auto i = next_index();
    if (!i) return std::nullopt;
    return Vector(samples_->col(*i));
  }

  /// Up to `n` samples as matrix columns; empty when exhausted. Batches do not
  /// straddle epochs.
  Matrix next_batch(Index n) {
    if (cursor_ == order_.size()) {
      if (epoch_ == epochs_ || order_.empty()) return Matrix(dim(), 0);
      ++epoch_;
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const Index take = std::min<Index>(n, static_cast<Index>(order_.size() - cursor_));
    Matrix out(dim(), take);
    for (Index i = 0; i < take; ++i) out.col(i) = samples_->col(order_[cursor_++]);
    return out;
  }

 private:
  const Matrix* samples_;
  int epochs_;
  int epoch_ = 0;
  std::mt19937_64 rng_;
  std::vector<Index> order_;
  std::size_t cursor_;
};

// ---------------------------------------------------------------------------
// Stochastic NIHT (one sample at a time)

struct StochasticNihtResult {
  SparseDictionary dict;
  Index samples_seen = 0;
  std::vector<double> optimal_steps;  // eta*_j of every atom step taken
};

/// For each drawn sample: OMP-code it, then update every atom in its support
/// with NIHT steps whose support-optimal step is damped by 1/(1 + i/T).
template <class Stream>
StochasticNihtResult stochastic_niht_train(Stream& stream, SparseDictionary a0, const TrainerConfig& cfg,
                                           double decay_t) {
  cfg.validate();
  StochasticNihtResult out{std::move(a0), 0, {}};
  SparseDictionary& sd = out.dict;
  const SeparableBase& base = sd.base();
  while (auto y = stream.next()) {
    detail::require(y->size() == sd.signal_dim(), ErrorCode::DimensionMismatch, "sample size");
    SparseVec x = omp(sd, *y, PursuitOptions{cfg.code_sparsity, 0.0});
    const double scale = decay_t > 0.0 ? 1.0 / (1.0 + static_cast<double>(out.samples_seen) / decay_t) : 1.0;
    Vector resid = *y - sd.apply(x);
    for (std::size_t t = 0; t < x.nnz(); ++t) {
      const Index j = x.support[t];
      const double xj = x.values[t];
      const Vector pa_old = sd.base().apply(sd.coeffs(j));
      AtomProblem prob{&base, (resid + xj * pa_old) * xj, xj * xj};
      SparseVec a = sd.coeffs(j);
      for (int step = 0; step < cfg.niht_iterations; ++step) {
        const NihtResult res = niht_atom_step(prob, a, sd.atom_sparsity(), cfg.backtrack, scale);
        if (res.status != NihtStatus::Accepted) break;
        out.optimal_steps.push_back(res.optimal_step);
        a = res.atom;
      }
      if (a.empty()) continue;
      sd.set_coeffs(j, a);
      resid -= xj * (base.apply(a) - pa_old);
      x.values[t] *= sd.renormalize(j);
    }
    ++out.samples_seen;
  }
  return out;
}

// ---------------------------------------------------------------------------
// OSDL

/// Global OSDL step ||G||_F / ||Phi G X_S||_F for the gradient block G
/// (columns S) and the matching rows of X. nullopt when the denominator
/// vanishes (degenerate step; the batch update is skipped).
inline std::optional<double> osdl_step_size(const Matrix& grad, const SeparableBase& base,
                                            std::span<const CodeRow> rows, Index examples) {
  detail::require(grad.rows() == base.atom_count() && grad.cols() == static_cast<Index>(rows.size()),
                  ErrorCode::DimensionMismatch, "gradient block and code rows disagree");
  Matrix m = Matrix::Zero(base.signal_dim(), examples);
  for (Index s = 0; s < grad.cols(); ++s) {
    const Vector pg = base.apply(Vector(grad.col(s)));
    for (const auto& [e, v] : rows[static_cast<std::size_t>(s)]) m.col(e) += v * pg;
  }
  const double den = m.norm();
  if (den < 1e-15) return std::nullopt;
  return grad.norm() / den;
}

/// The NIHT step ||G||_F^2 / ||Phi G X_S||_F^2 on the same block.
inline std::optional<double> niht_block_step_size(const Matrix& grad, const SeparableBase& base,
                                                  std::span<const CodeRow> rows, Index examples) {
  const auto eta = osdl_step_size(grad, base, rows, examples);
  if (!eta) return std::nullopt;
  Matrix m = Matrix::Zero(base.signal_dim(), examples);
  for (Index s = 0; s < grad.cols(); ++s) {
    const Vector pg = base.apply(Vector(grad.col(s)));
    for (const auto& [e, v] : rows[static_cast<std::size_t>(s)]) m.col(e) += v * pg;
  }
  return grad.squaredNorm() / m.squaredNorm();
}

struct TrainerState {
  SparseDictionary dict;
  std::vector<Vector> momentum;  // per atom; empty means zero
  EffectiveGram gram;
  Index t = 0;
  std::vector<Index> usage;
  std::mt19937_64 rng;

  TrainerState(SparseDictionary d, std::uint64_t seed)
      : dict(std::move(d)),
        momentum(static_cast<std::size_t>(dict.atom_count())),
        gram(gram_full(dict)),
        usage(static_cast<std::size_t>(dict.atom_count()), 0),
        rng(seed) {}
};

struct ProgressRow {
  Index t = 0;
  double batch_mse = 0.0;
  std::optional<double> test_mse;
};

using ProgressSink = std::function<void(const ProgressRow&)>;

/// Codes every column of `y` with Batch-OMP against the maintained Gram.
inline SparseCodeMatrix code_batch(const SparseDictionary& sd, const Matrix& gram, const Matrix& y, Index p,
                                   double residual_tol = 0.0) {
  SparseCodeMatrix x;
  x.dim = sd.atom_count();
  x.codes.resize(static_cast<std::size_t>(y.cols()));
  for (Index i = 0; i < y.cols(); ++i) {
    const Vector yi = y.col(i);
    x.codes[static_cast<std::size_t>(i)] = batch_omp(gram, sd.adjoint(yi), yi.squaredNorm(), p, residual_tol);
  }
  return x;
}

/// Mean squared error per entry of coding `y` with p atoms.
inline double coding_mse(const SparseDictionary& sd, const Matrix& gram, const Matrix& y, Index p) {
  if (y.cols() == 0) return 0.0;
  const SparseCodeMatrix x = code_batch(sd, gram, y, p);
  return residual_matrix(sd, y, x).squaredNorm() / static_cast<double>(y.size());
}

struct MaintenanceReport {
  std::vector<Index> unused;
  std::vector<Index> pruned;
  std::vector<Index> replaced;
};

/// Replaces atoms used fewer than `unused_threshold` times since the last
/// pass, and one atom of every pair with |G_ij| above `prune_coherence`. Each
/// replacement is the k-term OMP code (over the base) of one of the worst
/// represented examples of `recent`, taken in decreasing residual order.
/// Usage counters are reset.
inline MaintenanceReport replace_and_prune(TrainerState& st, const Matrix& recent,
                                           std::span<const double> residual_norms, const TrainerConfig& cfg) {
  MaintenanceReport rep;
  SparseDictionary& sd = st.dict;
  const Index m = sd.atom_count();
  std::vector<char> marked(static_cast<std::size_t>(m), 0);
  for (Index j = 0; j < m; ++j) {
    if (st.usage[static_cast<std::size_t>(j)] < cfg.unused_threshold) {
      marked[static_cast<std::size_t>(j)] = 1;
      rep.unused.push_back(j);
    }
  }
  for (Index j = 0; j < m; ++j) {
    if (marked[static_cast<std::size_t>(j)]) continue;
    for (Index i = 0; i < j; ++i) {
      if (marked[static_cast<std::size_t>(i)]) continue;
      if (std::abs(st.gram.g(i, j)) > cfg.prune_coherence) {
        marked[static_cast<std::size_t>(j)] = 1;
        rep.pruned.push_back(j);
        break;
      }
    }
  }
  std::fill(st.usage.begin(), st.usage.end(), 0);
  if (rep.unused.empty() && rep.pruned.empty()) return rep;
  detail::require(recent.rows() == sd.signal_dim() && static_cast<Index>(residual_norms.size()) == recent.cols(),
                  ErrorCode::DimensionMismatch, "recent batch and residuals disagree");

  std::vector<Index> worst(static_cast<std::size_t>(recent.cols()));
  std::iota(worst.begin(), worst.end(), Index{0});
  std::stable_sort(worst.begin(), worst.end(), [&](Index a, Index b) {
    return residual_norms[static_cast<std::size_t>(a)] > residual_norms[static_cast<std::size_t>(b)];
  });

  std::vector<Index> targets = rep.unused;
  targets.insert(targets.end(), rep.pruned.begin(), rep.pruned.end());
  std::sort(targets.begin(), targets.end());
  std::size_t next_example = 0;
  for (Index j : targets) {
    SparseVec code;
    while (next_example < worst.size() && code.empty()) {
      const Vector yi = recent.col(worst[next_example++]);
      code = omp(sd.base(), yi, PursuitOptions{sd.atom_sparsity(), 0.0});
    }
    if (code.empty()) break;
    sd.set_coeffs(j, std::move(code));
    sd.renormalize(j);
    st.momentum[static_cast<std::size_t>(j)] = Vector();
    rep.replaced.push_back(j);
  }
  gram_update(st.gram, sd, rep.replaced);
  return rep;
}

/// Decay horizon T used when the config leaves it unset.
inline double default_rate_decay(Index samples, Index batch_size) {
  const Index batches = (samples + batch_size - 1) / batch_size;
  return 10.0 * static_cast<double>(std::max<Index>(batches, 1));
}

/// Dictionary half of one OSDL iteration for a coded batch: momentum NIHT
/// step on the used atoms, projection to k entries, renormalization, Gram
/// refresh, and periodic maintenance. Returns the pre-update batch MSE.
inline double osdl_update(TrainerState& st, const Matrix& y, const SparseCodeMatrix& x, const TrainerConfig& cfg,
                          double decay_t) {
  SparseDictionary& sd = st.dict;
  const Matrix r = residual_matrix(sd, y, x);
  const double mse = r.squaredNorm() / static_cast<double>(std::max<Index>(y.size(), 1));

  const std::vector<Index> used = x.used_atoms();
  const auto all_rows = x.rows();
  for (Index j : used)
    st.usage[static_cast<std::size_t>(j)] += static_cast<Index>(all_rows[static_cast<std::size_t>(j)].size());

  std::vector<CodeRow> rows;
  rows.reserve(used.size());
  Matrix grad(sd.coeff_dim(), static_cast<Index>(used.size()));
  for (std::size_t s = 0; s < used.size(); ++s) {
    const CodeRow& row = all_rows[static_cast<std::size_t>(used[s])];
    Vector rj = Vector::Zero(sd.signal_dim());
    for (const auto& [e, v] : row) rj += v * r.col(e);
    grad.col(static_cast<Index>(s)) = -sd.base().adjoint(rj);
    rows.push_back(row);
  }

  const auto eta_star = osdl_step_size(grad, sd.base(), rows, y.cols());
  if (eta_star) {
    const double eta = *eta_star / (1.0 + static_cast<double>(st.t) / decay_t);
    for (std::size_t s = 0; s < used.size(); ++s) {
      const Index j = used[s];
      Vector& u = st.momentum[static_cast<std::size_t>(j)];
      if (u.size() == 0) u = Vector::Zero(sd.coeff_dim());
      u = cfg.momentum * u + eta * grad.col(static_cast<Index>(s));
      SparseVec a = hard_threshold(Vector(sd.coeffs(j).to_dense() - u), sd.atom_sparsity());
      if (a.empty()) continue;
      sd.set_coeffs(j, std::move(a));
      sd.renormalize(j);
    }
    gram_update(st.gram, sd, used);
  }
  ++st.t;

  if (cfg.maintenance_period > 0 && st.t % cfg.maintenance_period == 0) {
    std::vector<double> norms(static_cast<std::size_t>(y.cols()));
    for (Index i = 0; i < y.cols(); ++i) norms[static_cast<std::size_t>(i)] = r.col(i).norm();
    replace_and_prune(st, y, norms, cfg);
  }
  return mse;
}

/// One OSDL iteration on a mini-batch: Batch-OMP coding, then osdl_update.
inline double osdl_step(TrainerState& st, const Matrix& y, const TrainerConfig& cfg, double decay_t) {
  const SparseCodeMatrix x = code_batch(st.dict, st.gram.g, y, cfg.code_sparsity);
  return osdl_update(st, y, x, cfg, decay_t);
}

struct OsdlOptions {
  const Matrix* test_set = nullptr;
  Index test_every = 0;  // batches between test evaluations; 0 evaluates once per epoch end only
  ProgressSink progress;
};

/// Online Sparse Dictionary Learning over `epochs` shuffled passes of `samples`.
/// Deterministic for a given seed.
inline SparseDictionary osdl_train(const Matrix& samples, SparseDictionary a0, const TrainerConfig& cfg,
                                   const OsdlOptions& opts = {}) {
  cfg.validate();
  detail::require(samples.rows() == a0.signal_dim(), ErrorCode::DimensionMismatch,
                  "samples do not match the dictionary");
  const double decay_t = cfg.rate_decay > 0.0 ? cfg.rate_decay : default_rate_decay(samples.cols(), cfg.batch_size);
  TrainerState st(std::move(a0), cfg.seed);
  ShuffledSampleStream stream(samples, cfg.epochs, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const Index per_epoch = (samples.cols() + cfg.batch_size - 1) / cfg.batch_size;
  while (true) {
    const Matrix batch = stream.next_batch(cfg.batch_size);
    if (batch.cols() == 0) break;
    ProgressRow row;
    row.batch_mse = osdl_step(st, batch, cfg, decay_t);
    row.t = st.t;
    const bool epoch_end = per_epoch > 0 && st.t % per_epoch == 0;
    const bool periodic = opts.test_every > 0 && st.t % opts.test_every == 0;
    if (opts.test_set && opts.test_set->cols() > 0 && (epoch_end || periodic))
      row.test_mse = coding_mse(st.dict, st.gram.g, *opts.test_set, cfg.code_sparsity);
    if (opts.progress) opts.progress(row);
  }
  return std::move(st.dict);
}

}  // namespace trainlets
