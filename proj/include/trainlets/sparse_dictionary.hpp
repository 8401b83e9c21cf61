#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "trainlets/base_operator.hpp"
#include "trainlets/error.hpp"
#include "trainlets/sparse_vec.hpp"
#include "trainlets/types.hpp"

namespace trainlets {

/// Double-sparsity dictionary D = Phi * A. A is column-sparse with at most k
/// entries per column; columns are kept so that every effective atom Phi a_j
/// has unit norm.
class SparseDictionary {
 public:
  SparseDictionary(std::shared_ptr<const SeparableBase> base, std::vector<SparseVec> columns, Index atom_sparsity)
      : base_(std::move(base)), columns_(std::move(columns)), k_(atom_sparsity) {
    detail::require(base_ != nullptr, ErrorCode::DimensionMismatch, "missing base dictionary");
    detail::require(k_ >= 1, ErrorCode::InvalidConfig, "atom sparsity must be positive");
    for (const auto& c : columns_) {
      detail::require(c.dim == base_->atom_count() && c.valid(), ErrorCode::DimensionMismatch,
                      "column does not live in the base coefficient space");
      detail::require(static_cast<Index>(c.nnz()) <= k_, ErrorCode::InvalidConfig, "column exceeds atom sparsity");
    }
  }

  /// a_j = e_j for j < min(L', m) plus k-1 small random entries; further
  /// atoms get k random entries. Every effective atom is then normalized.
  static SparseDictionary identity_init(std::shared_ptr<const SeparableBase> base, Index atoms, Index k,
                                        std::uint64_t seed, double jitter = 1e-2) {
    const Index dim = base->atom_count();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<Index> pick(0, dim - 1);
    std::vector<SparseVec> cols;
    cols.reserve(static_cast<std::size_t>(atoms));
    for (Index j = 0; j < atoms; ++j) {
      Vector a = Vector::Zero(dim);
      Index placed = 0;
      if (j < dim) {
        a[j] = 1.0;
        ++placed;
      }
      const Index want = std::min(k, dim);
      while (placed < want) {
        const Index r = pick(rng);
        if (a[r] != 0.0) continue;
        a[r] = (j < dim ? jitter : 1.0) * normal(rng);
        if (a[r] == 0.0) a[r] = jitter;
        ++placed;
      }
      cols.push_back(SparseVec::from_dense(a));
    }
    SparseDictionary d(std::move(base), std::move(cols), k);
    for (Index j = 0; j < atoms; ++j) d.renormalize(j);
    return d;
  }

  const SeparableBase& base() const noexcept { return *base_; }
  const std::shared_ptr<const SeparableBase>& base_ptr() const noexcept { return base_; }
  Index atom_sparsity() const noexcept { return k_; }
  Index atom_count() const noexcept { return static_cast<Index>(columns_.size()); }
  Index signal_dim() const noexcept { return base_->signal_dim(); }
  Index coeff_dim() const noexcept { return base_->atom_count(); }

  const SparseVec& coeffs(Index j) const { return columns_[static_cast<std::size_t>(j)]; }
  const std::vector<SparseVec>& columns() const noexcept { return columns_; }

  void set_coeffs(Index j, SparseVec a) {
    detail::require(a.dim == coeff_dim() && a.valid(), ErrorCode::DimensionMismatch, "column shape");
    detail::require(static_cast<Index>(a.nnz()) <= k_, ErrorCode::InvalidConfig, "column exceeds atom sparsity");
    columns_[static_cast<std::size_t>(j)] = std::move(a);
  }

  /// A x as a dense coefficient vector in the base space.
  Vector combine(const SparseVec& x) const {
    check_code(x);
    Vector c = Vector::Zero(coeff_dim());
    for (std::size_t i = 0; i < x.nnz(); ++i) {
      const SparseVec& a = columns_[static_cast<std::size_t>(x.support[i])];
      for (std::size_t t = 0; t < a.nnz(); ++t) c[a.support[t]] += x.values[i] * a.values[t];
    }
    return c;
  }

  Vector apply(const SparseVec& x) const { return base_->apply(combine(x)); }

  Vector apply(const Vector& x) const { return apply(SparseVec::from_dense(x)); }

  Vector adjoint(const Vector& r) const {
    const Vector c = base_->adjoint(r);
    Vector out(atom_count());
    for (Index j = 0; j < atom_count(); ++j) out[j] = columns_[static_cast<std::size_t>(j)].dot(c);
    return out;
  }

  /// Effective atom Phi a_j.
  Vector column(Index j) const { return base_->apply(columns_[static_cast<std::size_t>(j)]); }

  double atom_norm(Index j) const {
    const SparseVec& a = columns_[static_cast<std::size_t>(j)];
    return std::sqrt(std::max(0.0, a.dot(base_->gram_apply(a))));
  }

  /// Rescales column j so ||Phi a_j|| = 1 and returns the previous norm; the
  /// caller compensates row j of the codes by multiplying with it. Zero
  /// columns are left alone and report 0.
  double renormalize(Index j) {
    const double nrm = atom_norm(j);
    if (nrm > 0.0) columns_[static_cast<std::size_t>(j)].scale(1.0 / nrm);
    return nrm;
  }

  /// Dense Phi A; test and small-problem use only.
  Matrix explicit_matrix() const {
    Matrix out(signal_dim(), atom_count());
    for (Index j = 0; j < atom_count(); ++j) out.col(j) = column(j);
    return out;
  }

 private:
  void check_code(const SparseVec& x) const {
    detail::require(x.dim == atom_count(), ErrorCode::DimensionMismatch,
                    "code size " + std::to_string(x.dim) + " != atom count " + std::to_string(atom_count()));
  }

  std::shared_ptr<const SeparableBase> base_;
  std::vector<SparseVec> columns_;
  Index k_;
};

/// Gram matrix of the effective dictionary, (Phi A)^T (Phi A), with per-column
/// fingerprints of A recorded when each column was last refreshed.
struct EffectiveGram {
  Matrix g;
  std::vector<std::uint64_t> fingerprints;
};

namespace detail {

inline std::uint64_t fingerprint(const SparseVec& a) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (std::size_t i = 0; i < a.nnz(); ++i) {
    mix(static_cast<std::uint64_t>(a.support[i]));
    mix(std::bit_cast<std::uint64_t>(a.values[i]));
  }
  return h;
}

#ifdef NDEBUG
inline constexpr bool kVerifyGram = false;
#else
inline constexpr bool kVerifyGram = true;
#endif

}  // namespace detail

/// G = A^T G_Phi A computed through the sparse columns of A.
inline EffectiveGram gram_full(const SparseDictionary& sd) {
  const Index m = sd.atom_count();
  EffectiveGram eg;
  eg.g.resize(m, m);
  eg.fingerprints.resize(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) {
    const Vector v = sd.base().gram_apply(sd.coeffs(j));
    for (Index i = 0; i <= j; ++i) {
      const double x = sd.coeffs(i).dot(v);
      eg.g(i, j) = x;
      eg.g(j, i) = x;
    }
    eg.fingerprints[static_cast<std::size_t>(j)] = detail::fingerprint(sd.coeffs(j));
  }
  return eg;
}

/// Recomputes rows and columns `changed` of G; every other entry is left
/// untouched. When `verify` is set, columns outside `changed` must still match
/// their recorded fingerprints (StaleGram otherwise).
inline void gram_update(EffectiveGram& eg, const SparseDictionary& sd, std::span<const Index> changed,
                        bool verify = detail::kVerifyGram) {
  const Index m = sd.atom_count();
  detail::require(eg.g.rows() == m && eg.g.cols() == m, ErrorCode::DimensionMismatch, "Gram size");
  if (verify) {
    std::vector<char> in_set(static_cast<std::size_t>(m), 0);
    for (Index j : changed) in_set[static_cast<std::size_t>(j)] = 1;
    for (Index j = 0; j < m; ++j) {
      if (in_set[static_cast<std::size_t>(j)]) continue;
      detail::require(eg.fingerprints[static_cast<std::size_t>(j)] == detail::fingerprint(sd.coeffs(j)),
                      ErrorCode::StaleGram, "column " + std::to_string(j) + " changed outside the update set");
    }
  }
  for (Index j : changed) {
    const Vector v = sd.base().gram_apply(sd.coeffs(j));
    for (Index i = 0; i < m; ++i) {
      const double x = sd.coeffs(i).dot(v);
      eg.g(i, j) = x;
      eg.g(j, i) = x;
    }
    eg.fingerprints[static_cast<std::size_t>(j)] = detail::fingerprint(sd.coeffs(j));
  }
}

}  // namespace trainlets
