#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "trainlets/error.hpp"
#include "trainlets/types.hpp"

namespace trainlets {

/// Sparse vector with strictly increasing support.
struct SparseVec {
  Index dim = 0;
  std::vector<Index> support;
  std::vector<double> values;

  SparseVec() = default;
  explicit SparseVec(Index d) : dim(d) {}

  std::size_t nnz() const noexcept { return support.size(); }
  bool empty() const noexcept { return support.empty(); }

  Vector to_dense() const {
    Vector v = Vector::Zero(dim);
    for (std::size_t i = 0; i < support.size(); ++i) v[support[i]] = values[i];
    return v;
  }

  /// Keeps every non-zero entry of `v`.
  static SparseVec from_dense(const Vector& v) {
    SparseVec s(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      if (v[i] != 0.0) {
        s.support.push_back(i);
        s.values.push_back(v[i]);
      }
    }
    return s;
  }

  double dot(const Vector& v) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) acc += values[i] * v[support[i]];
    return acc;
  }

  double squared_norm() const {
    double acc = 0.0;
    for (double x : values) acc += x * x;
    return acc;
  }

  void scale(double s) {
    for (double& x : values) x *= s;
  }

  /// Value at index i, or 0 when i is not in the support.
  double at(Index i) const {
    const auto it = std::lower_bound(support.begin(), support.end(), i);
    if (it == support.end() || *it != i) return 0.0;
    return values[static_cast<std::size_t>(it - support.begin())];
  }

  bool valid() const {
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (support[i] < 0 || support[i] >= dim) return false;
      if (i > 0 && support[i] <= support[i - 1]) return false;
    }
    return support.size() == values.size();
  }

  friend bool operator==(const SparseVec&, const SparseVec&) = default;
};

/// One sparse code per example (column of X).
struct SparseCodeMatrix {
  Index dim = 0;
  std::vector<SparseVec> codes;

  Index examples() const noexcept { return static_cast<Index>(codes.size()); }

  /// Row view of X: for every atom, the (example, value) pairs that use it.
  std::vector<std::vector<std::pair<Index, double>>> rows() const {
    std::vector<std::vector<std::pair<Index, double>>> out(static_cast<std::size_t>(dim));
    for (Index e = 0; e < examples(); ++e) {
      const SparseVec& c = codes[static_cast<std::size_t>(e)];
      for (std::size_t i = 0; i < c.nnz(); ++i)
        out[static_cast<std::size_t>(c.support[i])].emplace_back(e, c.values[i]);
    }
    return out;
  }

  /// Sorted union of all supports.
  std::vector<Index> used_atoms() const {
    std::vector<char> used(static_cast<std::size_t>(dim), 0);
    for (const auto& c : codes)
      for (Index j : c.support) used[static_cast<std::size_t>(j)] = 1;
    std::vector<Index> out;
    for (Index j = 0; j < dim; ++j)
      if (used[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
  }
};

/// Projection onto k-sparse vectors: keeps the k largest magnitudes, ties
/// going to the lower index. Zero entries are never stored.
inline SparseVec hard_threshold(std::span<const double> v, Index k) {
  const auto dim = static_cast<Index>(v.size());
  SparseVec out(dim);
  if (k <= 0) return out;
  std::vector<Index> order(v.size());
  std::iota(order.begin(), order.end(), Index{0});
  const auto before = [&](Index a, Index b) {
    const double ma = std::abs(v[static_cast<std::size_t>(a)]);
    const double mb = std::abs(v[static_cast<std::size_t>(b)]);
    return ma > mb || (ma == mb && a < b);
  };
  if (k < dim) {
    std::nth_element(order.begin(), order.begin() + k, order.end(), before);
    order.resize(static_cast<std::size_t>(k));
  }
  std::sort(order.begin(), order.end());
  for (Index i : order) {
    const double x = v[static_cast<std::size_t>(i)];
    if (x == 0.0) continue;
    out.support.push_back(i);
    out.values.push_back(x);
  }
  return out;
}

inline SparseVec hard_threshold(const Vector& v, Index k) {
  return hard_threshold(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), k);
}

}  // namespace trainlets
