#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "trainlets/error.hpp"
#include "trainlets/sparse_vec.hpp"
#include "trainlets/types.hpp"
#include "trainlets/wavelets.hpp"

namespace trainlets {

enum class BaseKind : std::uint8_t { CroppedWavelet = 0, Odct = 1, PeriodicWavelet = 2, Explicit = 3 };

/// Everything needed to rebuild a base dictionary deterministically.
struct BaseSpec {
  BaseKind kind = BaseKind::CroppedWavelet;
  WaveletFamily family = WaveletFamily::Symlet;
  int order = 4;
  int levels = 0;        // 0 selects the deepest admissible decomposition
  Index side = 0;        // n (1-D length or patch side)
  Index odct_atoms = 0;  // ODCT only
  int dims = 2;

  friend bool operator==(const BaseSpec&, const BaseSpec&) = default;
};

/// A 1-D base dictionary Phi (n x L'), used directly (dims = 1) or as the
/// separable Kronecker product Phi (x) Phi on column-major n x n patches (dims = 2).
/// The 2-D operator is never materialized.
class SeparableBase {
 public:
  SeparableBase(Matrix phi, int dims, BaseSpec spec = BaseSpec{.kind = BaseKind::Explicit})
      : phi_(std::move(phi)), dims_(dims), spec_(spec) {
    detail::require(dims_ == 1 || dims_ == 2, ErrorCode::DimensionMismatch, "dims must be 1 or 2");
    gram1d_ = phi_.transpose() * phi_;
    spec_.dims = dims_;
    spec_.side = phi_.rows();
  }

  static SeparableBase from_spec(BaseSpec spec) {
    switch (spec.kind) {
      case BaseKind::CroppedWavelet: {
        const auto filter = wavelet_filters(spec.family, spec.order);
        auto d = spec.levels > 0 ? cropped_dictionary(filter, spec.side, spec.levels)
                                 : cropped_dictionary(filter, spec.side);
        spec.levels = d.levels;
        spec.order = filter.order;
        return SeparableBase(std::move(d.atoms), spec.dims, spec);
      }
      case BaseKind::PeriodicWavelet: {
        const auto filter = wavelet_filters(spec.family, spec.order);
        if (spec.levels <= 0) spec.levels = max_wavelet_levels(spec.side, filter.taps());
        spec.order = filter.order;
        auto w = synthesis_matrix(filter, spec.side, spec.levels);
        return SeparableBase(std::move(w.columns), spec.dims, spec);
      }
      case BaseKind::Odct:
        detail::require(spec.odct_atoms >= spec.side, ErrorCode::InvalidConfig, "ODCT needs at least n atoms");
        return SeparableBase(odct_dictionary(spec.side, spec.odct_atoms), spec.dims, spec);
      case BaseKind::Explicit:
        break;
    }
    throw Error(ErrorCode::InvalidConfig, "explicit bases cannot be rebuilt from a spec");
  }

  int dims() const noexcept { return dims_; }
  Index side() const noexcept { return phi_.rows(); }
  Index atoms_1d() const noexcept { return phi_.cols(); }
  Index signal_dim() const noexcept { return dims_ == 1 ? side() : side() * side(); }
  Index atom_count() const noexcept { return dims_ == 1 ? atoms_1d() : atoms_1d() * atoms_1d(); }
  const Matrix& phi1d() const noexcept { return phi_; }
  const Matrix& gram1d() const noexcept { return gram1d_; }
  const BaseSpec& spec() const noexcept { return spec_; }

  Vector apply(const Vector& coeffs) const {
    check_size(coeffs.size(), atom_count(), "coefficient");
    if (dims_ == 1) return phi_ * coeffs;
    const Index l = atoms_1d();
    Eigen::Map<const Matrix> c(coeffs.data(), l, l);
    Matrix patch = phi_ * c * phi_.transpose();
    return Eigen::Map<const Vector>(patch.data(), patch.size());
  }

  Vector apply(const SparseVec& coeffs) const {
    check_size(coeffs.dim, atom_count(), "coefficient");
    if (dims_ == 1) {
      Vector out = Vector::Zero(side());
      for (std::size_t i = 0; i < coeffs.nnz(); ++i) out += coeffs.values[i] * phi_.col(coeffs.support[i]);
      return out;
    }
    return apply(coeffs.to_dense());
  }

  Vector adjoint(const Vector& signal) const {
    check_size(signal.size(), signal_dim(), "signal");
    if (dims_ == 1) return phi_.transpose() * signal;
    const Index n = side();
    Eigen::Map<const Matrix> y(signal.data(), n, n);
    Matrix c = phi_.transpose() * y * phi_;
    return Eigen::Map<const Vector>(c.data(), c.size());
  }

  /// Column j of the (implicit) base matrix.
  Vector column(Index j) const {
    if (dims_ == 1) return phi_.col(j);
    const Index l = atoms_1d();
    const Index n = side();
    const auto r = phi_.col(j % l);
    const auto c = phi_.col(j / l);
    Vector out(n * n);
    for (Index i2 = 0; i2 < n; ++i2) out.segment(i2 * n, n) = r * c[i2];
    return out;
  }

  double gram(Index i, Index j) const {
    if (dims_ == 1) return gram1d_(i, j);
    const Index l = atoms_1d();
    return gram1d_(i % l, j % l) * gram1d_(i / l, j / l);
  }

  /// G_Phi * a for a sparse coefficient vector, using the Kronecker structure in 2-D.
  Vector gram_apply(const SparseVec& a) const {
    check_size(a.dim, atom_count(), "coefficient");
    if (dims_ == 1) {
      Vector out = Vector::Zero(atoms_1d());
      for (std::size_t i = 0; i < a.nnz(); ++i) out += a.values[i] * gram1d_.col(a.support[i]);
      return out;
    }
    const Index l = atoms_1d();
    // M = G1 * A, only columns touched by `a` are non-zero.
    Matrix m = Matrix::Zero(l, l);
    std::vector<char> touched(static_cast<std::size_t>(l), 0);
    for (std::size_t i = 0; i < a.nnz(); ++i) {
      const Index r = a.support[i] % l, c = a.support[i] / l;
      m.col(c) += a.values[i] * gram1d_.col(r);
      touched[static_cast<std::size_t>(c)] = 1;
    }
    Vector out = Vector::Zero(l * l);
    Eigen::Map<Matrix> v(out.data(), l, l);
    for (Index c = 0; c < l; ++c)
      if (touched[static_cast<std::size_t>(c)]) v.noalias() += m.col(c) * gram1d_.row(c);
    return out;
  }

  /// Dense base matrix; test and small-problem use only.
  Matrix explicit_matrix() const {
    if (dims_ == 1) return phi_;
    Matrix out(signal_dim(), atom_count());
    for (Index j = 0; j < atom_count(); ++j) out.col(j) = column(j);
    return out;
  }

 private:
  static void check_size(Index got, Index want, const char* what) {
    detail::require(got == want, ErrorCode::DimensionMismatch,
                    std::string(what) + " size " + std::to_string(got) + " != " + std::to_string(want));
  }

  Matrix phi_;
  Matrix gram1d_;
  int dims_;
  BaseSpec spec_;
};

}  // namespace trainlets
