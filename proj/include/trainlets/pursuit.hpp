#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

#include "trainlets/error.hpp"
#include "trainlets/sparse_vec.hpp"
#include "trainlets/types.hpp"

namespace trainlets {

/// Anything OMP can code against: signal/atom dimensions, the adjoint D^T r,
/// and single-column access. Forward application is used by reconstruction helpers.
template <class D>
concept PursuitDictionary = requires(const D& d, const Vector& v, const SparseVec& x, Index j) {
  { d.signal_dim() } -> std::convertible_to<Index>;
  { d.atom_count() } -> std::convertible_to<Index>;
  { d.adjoint(v) } -> std::convertible_to<Vector>;
  { d.column(j) } -> std::convertible_to<Vector>;
  { d.apply(x) } -> std::convertible_to<Vector>;
};

/// Dense dictionary stored column-wise.
class ExplicitDictionary {
 public:
  explicit ExplicitDictionary(Matrix atoms) : atoms_(std::move(atoms)) {}

  Index signal_dim() const noexcept { return atoms_.rows(); }
  Index atom_count() const noexcept { return atoms_.cols(); }
  const Matrix& matrix() const noexcept { return atoms_; }

  Vector adjoint(const Vector& r) const {
    detail::require(r.size() == atoms_.rows(), ErrorCode::DimensionMismatch, "signal size");
    return atoms_.transpose() * r;
  }
  Vector column(Index j) const { return atoms_.col(j); }
  Vector apply(const SparseVec& x) const {
    detail::require(x.dim == atoms_.cols(), ErrorCode::DimensionMismatch, "code size");
    Vector out = Vector::Zero(atoms_.rows());
    for (std::size_t i = 0; i < x.nnz(); ++i) out += x.values[i] * atoms_.col(x.support[i]);
    return out;
  }

 private:
  Matrix atoms_;
};

enum class PursuitStatus {
  ReachedSparsity,
  ReachedTolerance,
  Exhausted,           // residual orthogonal to every unused atom
  NumericalBreakdown,  // Cholesky pivot under threshold
};

struct PursuitOptions {
  Index max_atoms = 0;        // p; 0 means no cap besides the atom count
  double residual_tol = 0.0;  // epsilon on ||r||_2
};

/// Per-iteration diagnostics; residual_norms[0] is ||y||.
struct PursuitTrace {
  std::vector<Index> selection_order;
  std::vector<double> residual_norms;
  PursuitStatus status = PursuitStatus::ReachedSparsity;
};

inline constexpr double kCholeskyBreakdown = 1e-12;

namespace detail {

// Incremental lower-triangular Cholesky factor of the support Gram.
class IncrementalCholesky {
 public:
  explicit IncrementalCholesky(Index capacity) : l_(Matrix::Zero(capacity, capacity)) {}

  Index size() const noexcept { return size_; }

  /// Appends an atom with Gram column `g` (against the current support) and
  /// squared norm `diag`. Returns false, leaving the factor untouched, on breakdown.
  bool append(const Vector& g, double diag) {
    if (size_ == l_.rows()) grow();
    Vector w = g.head(size_);
    if (size_ > 0) l_.topLeftCorner(size_, size_).triangularView<Eigen::Lower>().solveInPlace(w);
    const double pivot_sq = diag - w.squaredNorm();
    if (!(pivot_sq > kCholeskyBreakdown * kCholeskyBreakdown)) return false;
    l_.row(size_).head(size_) = w.transpose();
    l_(size_, size_) = std::sqrt(pivot_sq);
    ++size_;
    return true;
  }

  /// Solves (L L^T) x = b.
  Vector solve(const Vector& b) const {
    const auto l = l_.topLeftCorner(size_, size_);
    Vector x = l.triangularView<Eigen::Lower>().solve(b);
    l.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
  }

 private:
  void grow() {
    const Index cap = std::max<Index>(4, 2 * l_.rows());
    Matrix bigger = Matrix::Zero(cap, cap);
    bigger.topLeftCorner(size_, size_) = l_.topLeftCorner(size_, size_);
    l_.swap(bigger);
  }

  Matrix l_;
  Index size_ = 0;
};

inline Index argmax_abs_masked(const Vector& c, const std::vector<char>& mask) {
  Index best = -1;
  double best_val = -1.0;
  for (Index i = 0; i < c.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) continue;
    const double v = std::abs(c[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return best;
}

inline SparseVec sorted_code(Index dim, const std::vector<Index>& sel, const Vector& coeffs) {
  std::vector<std::size_t> order(sel.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sel[a] < sel[b]; });
  SparseVec out(dim);
  for (std::size_t i : order) {
    out.support.push_back(sel[i]);
    out.values.push_back(coeffs[static_cast<Index>(i)]);
  }
  return out;
}

}  // namespace detail

/// Orthogonal Matching Pursuit with an incrementally updated Cholesky factor.
/// Stops when |support| = p, ||r|| <= epsilon, no unused atom correlates with
/// the residual, or the next pivot falls below kCholeskyBreakdown.
template <PursuitDictionary D>
SparseVec omp(const D& dict, const Vector& y, const PursuitOptions& opts, PursuitTrace* trace = nullptr) {
  const Index n = dict.signal_dim();
  const Index m = dict.atom_count();
  detail::require(y.size() == n, ErrorCode::DimensionMismatch, "signal size does not match dictionary");
  const Index cap = opts.max_atoms > 0 ? std::min(opts.max_atoms, m) : std::min(n, m);

  PursuitTrace local;
  PursuitTrace& tr = trace ? *trace : local;
  tr = PursuitTrace{};

  const double y_norm = y.norm();
  tr.residual_norms.push_back(y_norm);
  std::vector<Index> sel;
  Vector coeffs;
  if (y_norm <= opts.residual_tol) {
    tr.status = PursuitStatus::ReachedTolerance;
    return SparseVec(m);
  }

  std::vector<char> mask(static_cast<std::size_t>(m), 0);
  Matrix cols(n, std::max<Index>(cap, 1));
  Vector proj_y(cap);
  detail::IncrementalCholesky chol(cap);
  Vector residual = y;
  tr.status = PursuitStatus::ReachedSparsity;
  const double floor = std::numeric_limits<double>::epsilon() * y_norm;

  while (static_cast<Index>(sel.size()) < cap) {
    const Vector corr = dict.adjoint(residual);
    const Index j = detail::argmax_abs_masked(corr, mask);
    if (j < 0 || std::abs(corr[j]) <= floor) {
      tr.status = PursuitStatus::Exhausted;
      break;
    }
    const Vector atom = dict.column(j);
    const auto s = static_cast<Index>(sel.size());
    const Vector g = s > 0 ? Vector(cols.leftCols(s).transpose() * atom) : Vector();
    if (!chol.append(g, atom.squaredNorm())) {
      tr.status = PursuitStatus::NumericalBreakdown;
      break;
    }
    cols.col(s) = atom;
    proj_y[s] = atom.dot(y);
    sel.push_back(j);
    mask[static_cast<std::size_t>(j)] = 1;

    coeffs = chol.solve(proj_y.head(s + 1));
    residual = y - cols.leftCols(s + 1) * coeffs;
    const double rn = residual.norm();
    tr.selection_order.push_back(j);
    tr.residual_norms.push_back(rn);
    if (rn <= opts.residual_tol) {
      tr.status = PursuitStatus::ReachedTolerance;
      break;
    }
  }
  return detail::sorted_code(m, sel, coeffs);
}

/// Gram-driven OMP: needs only G = D^T D, D^T y and ||y||^2. The residual norm
/// is tracked through the Gram recurrence; no residual vector is formed.
inline SparseVec batch_omp(const Matrix& gram, const Vector& alpha0, double y_norm_sq, Index max_atoms,
                           double residual_tol, PursuitTrace* trace = nullptr) {
  const Index m = gram.rows();
  detail::require(gram.cols() == m && alpha0.size() == m, ErrorCode::DimensionMismatch,
                  "Gram and correlation sizes disagree");
  for (Index i = 0; i < m; ++i)
    detail::require(std::abs(gram(i, i) - 1.0) <= 1e-6, ErrorCode::InconsistentGram,
                    "Gram diagonal entry " + std::to_string(i) + " is " + std::to_string(gram(i, i)));

  const Index cap = max_atoms > 0 ? std::min(max_atoms, m) : m;
  PursuitTrace local;
  PursuitTrace& tr = trace ? *trace : local;
  tr = PursuitTrace{};
  tr.residual_norms.push_back(std::sqrt(std::max(0.0, y_norm_sq)));

  const double tol_sq = residual_tol * residual_tol;
  double err = y_norm_sq;
  std::vector<Index> sel;
  Vector coeffs;
  if (err <= tol_sq) {
    tr.status = PursuitStatus::ReachedTolerance;
    return SparseVec(m);
  }

  std::vector<char> mask(static_cast<std::size_t>(m), 0);
  detail::IncrementalCholesky chol(cap);
  Vector alpha = alpha0;
  Vector proj_y(cap);
  Matrix gram_sel(m, cap);
  double delta_prev = 0.0;
  const double floor = std::numeric_limits<double>::epsilon() * std::sqrt(y_norm_sq);
  tr.status = PursuitStatus::ReachedSparsity;

  while (static_cast<Index>(sel.size()) < cap) {
    const Index j = detail::argmax_abs_masked(alpha, mask);
    if (j < 0 || std::abs(alpha[j]) <= floor) {
      tr.status = PursuitStatus::Exhausted;
      break;
    }
    const auto s = static_cast<Index>(sel.size());
    Vector g(s);
    for (Index i = 0; i < s; ++i) g[i] = gram(sel[static_cast<std::size_t>(i)], j);
    if (!chol.append(g, gram(j, j))) {
      tr.status = PursuitStatus::NumericalBreakdown;
      break;
    }
    gram_sel.col(s) = gram.col(j);
    proj_y[s] = alpha0[j];
    sel.push_back(j);
    mask[static_cast<std::size_t>(j)] = 1;

    coeffs = chol.solve(proj_y.head(s + 1));
    const Vector beta = gram_sel.leftCols(s + 1) * coeffs;
    alpha = alpha0 - beta;
    double delta = 0.0;
    for (Index i = 0; i <= s; ++i) delta += coeffs[i] * beta[sel[static_cast<std::size_t>(i)]];
    err = err - delta + delta_prev;
    delta_prev = delta;
    tr.selection_order.push_back(j);
    tr.residual_norms.push_back(std::sqrt(std::max(0.0, err)));
    if (err <= tol_sq) {
      tr.status = PursuitStatus::ReachedTolerance;
      break;
    }
  }
  return detail::sorted_code(m, sel, coeffs);
}

/// Reconstruction D x for any pursuit dictionary.
template <PursuitDictionary D>
Vector reconstruct(const D& dict, const SparseVec& x) {
  return dict.apply(x);
}

}  // namespace trainlets
