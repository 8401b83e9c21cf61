#pragma once

#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "trainlets/error.hpp"
#include "trainlets/types.hpp"
#include "trainlets/wavelet_filters.hpp"

namespace trainlets {

/// Orthonormal periodized wavelet synthesis matrix W_s (L x L). Column order
/// follows the coefficient layout [approx_J, detail_J, detail_{J-1}, ..., detail_1].
struct OrthonormalSynthesisMatrix {
  Index size = 0;
  int levels = 0;
  Matrix columns;
};

/// Rows n of an extended synthesis matrix, restricted to the centered window
/// and rescaled to unit-norm columns. Columns vanishing on the window are dropped.
struct CroppedWaveletDictionary {
  Index signal_len = 0;
  Index extended_len = 0;
  Index offset = 0;
  int levels = 0;
  WaveletFilterPair filter;
  Matrix atoms;                     // n x L'
  std::vector<double> norm_scales;  // diagonal of the rescaling, one per kept column
  std::vector<Index> kept_columns;  // indices into the columns of W_s

  Index atom_count() const noexcept { return atoms.cols(); }
};

inline bool is_power_of_two(Index v) noexcept { return v > 0 && std::has_single_bit(static_cast<std::uint64_t>(v)); }

inline int log2_exact(Index v) noexcept { return std::bit_width(static_cast<std::uint64_t>(v)) - 1; }

inline int ceil_log2(Index v) noexcept { return v <= 1 ? 0 : std::bit_width(static_cast<std::uint64_t>(v - 1)); }

/// Deepest decomposition for which the last synthesis stage still operates on
/// a signal at least as long as the filter. Zero when even one level does not fit.
inline int max_wavelet_levels(Index length, std::size_t taps) noexcept {
  if (!is_power_of_two(length)) return 0;
  const int depth = log2_exact(length) - ceil_log2(static_cast<Index>(taps)) + 1;
  return std::max(0, std::min(depth, log2_exact(length)));
}

namespace detail {

inline void check_levels(Index length, const WaveletFilterPair& filter, int levels) {
  require(is_power_of_two(length) && length >= 2, ErrorCode::InvalidLength,
          "length " + std::to_string(length) + " is not a power of two");
  const int max_levels = max_wavelet_levels(length, filter.taps());
  require(levels >= 1 && levels <= max_levels, ErrorCode::TooManyLevels,
          std::to_string(levels) + " levels requested, at most " + std::to_string(max_levels) + " fit length " +
              std::to_string(length));
}

// Filter phase: tap i of coefficient k lands on sample 2k + i - (taps/2 - 1),
// the usual periodization alignment.
inline Index stage_index(Index k, Index i, Index taps, Index full) {
  return ((2 * k + i - (taps / 2 - 1)) % full + full) % full;
}

// One periodic synthesis stage: approx (M) + detail (M) -> signal (2M).
inline void synthesis_stage(const WaveletFilterPair& f, const double* approx, const double* detail, Index half,
                            double* out) {
  const Index full = 2 * half;
  const auto taps = static_cast<Index>(f.taps());
  std::fill(out, out + full, 0.0);
  for (Index k = 0; k < half; ++k) {
    const double a = approx[k], d = detail[k];
    if (a == 0.0 && d == 0.0) continue;
    for (Index i = 0; i < taps; ++i) out[stage_index(k, i, taps, full)] += f.lowpass[i] * a + f.highpass[i] * d;
  }
}

// Adjoint of synthesis_stage.
inline void analysis_stage(const WaveletFilterPair& f, const double* in, Index half, double* approx, double* detail) {
  const Index full = 2 * half;
  const auto taps = static_cast<Index>(f.taps());
  for (Index k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (Index i = 0; i < taps; ++i) {
      const double x = in[stage_index(k, i, taps, full)];
      a += f.lowpass[i] * x;
      d += f.highpass[i] * x;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

}  // namespace detail

/// Inverse periodic DWT of a coefficient vector laid out as [a_J, d_J, ..., d_1].
inline Vector inverse_dwt(const WaveletFilterPair& filter, const Vector& coeffs, int levels) {
  const Index length = coeffs.size();
  detail::check_levels(length, filter, levels);
  Vector current = coeffs.head(length >> levels);
  Vector next;
  for (int lev = levels; lev >= 1; --lev) {
    const Index half = length >> lev;
    next.resize(2 * half);
    detail::synthesis_stage(filter, current.data(), coeffs.data() + half, half, next.data());
    current.swap(next);
  }
  return current;
}

/// Forward periodic DWT; the exact adjoint (and inverse) of inverse_dwt.
inline Vector forward_dwt(const WaveletFilterPair& filter, const Vector& signal, int levels) {
  const Index length = signal.size();
  detail::check_levels(length, filter, levels);
  Vector coeffs(length);
  Vector current = signal;
  for (int lev = 1; lev <= levels; ++lev) {
    const Index half = length >> lev;
    Vector approx(half);
    detail::analysis_stage(filter, current.data(), half, approx.data(), coeffs.data() + half);
    current.swap(approx);
  }
  coeffs.head(current.size()) = current;
  return coeffs;
}

inline OrthonormalSynthesisMatrix synthesis_matrix(const WaveletFilterPair& filter, Index length, int levels) {
  detail::check_levels(length, filter, levels);
  OrthonormalSynthesisMatrix w;
  w.size = length;
  w.levels = levels;
  w.columns.resize(length, length);
  Vector unit = Vector::Zero(length);
  for (Index j = 0; j < length; ++j) {
    unit[j] = 1.0;
    w.columns.col(j) = inverse_dwt(filter, unit, levels);
    unit[j] = 0.0;
  }
  return w;
}

/// Extended length used for an n-sample signal: twice the next power of two.
inline Index cropped_extended_length(Index n) noexcept { return Index{1} << (ceil_log2(n) + 1); }

/// Builds the cropped-wavelet dictionary for length-n signals. `levels`
/// defaults to the deepest decomposition the filter admits at the extended length.
inline CroppedWaveletDictionary cropped_dictionary(const WaveletFilterPair& filter, Index n,
                                                   std::optional<int> levels = std::nullopt) {
  detail::require(n >= 4, ErrorCode::InvalidSignalLength, "signal length " + std::to_string(n) + " < 4");
  const Index ext = cropped_extended_length(n);
  const int lev = levels.value_or(max_wavelet_levels(ext, filter.taps()));
  const OrthonormalSynthesisMatrix ws = synthesis_matrix(filter, ext, lev);

  CroppedWaveletDictionary d;
  d.signal_len = n;
  d.extended_len = ext;
  d.offset = (ext - n) / 2;
  d.levels = lev;
  d.filter = filter;

  const auto window = ws.columns.middleRows(d.offset, n);
  std::vector<Index> kept;
  std::vector<double> norms;
  for (Index j = 0; j < ext; ++j) {
    const double nrm = window.col(j).norm();
    if (nrm < 1e-12) continue;
    kept.push_back(j);
    norms.push_back(nrm);
  }
  d.atoms.resize(n, static_cast<Index>(kept.size()));
  d.norm_scales.resize(kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    d.atoms.col(static_cast<Index>(c)) = window.col(kept[c]) / norms[c];
    d.norm_scales[c] = 1.0 / norms[c];
  }
  d.kept_columns = std::move(kept);
  return d;
}

/// Overcomplete DCT with `count` unit-norm atoms of length n (non-constant
/// atoms are mean-removed).
inline Matrix odct_dictionary(Index n, Index count) {
  detail::require(n >= 1 && count >= 1, ErrorCode::InvalidSignalLength, "empty ODCT");
  Matrix d(n, count);
  for (Index k = 0; k < count; ++k) {
    for (Index i = 0; i < n; ++i)
      d(i, k) = std::cos(static_cast<double>(i * k) * std::numbers::pi / static_cast<double>(count));
    if (k > 0) d.col(k).array() -= d.col(k).mean();
    d.col(k).normalize();
  }
  return d;
}

/// Phi * C * Phi^T, the separable 2-D synthesis. Equals kron(Phi, Phi) * vec(C)
/// under column-major vectorization.
inline Matrix separable_apply(const Matrix& phi, const Matrix& coeffs) {
  detail::require(coeffs.rows() == phi.cols() && coeffs.cols() == phi.cols(), ErrorCode::DimensionMismatch,
                  "coefficient block must be L' x L'");
  return phi * coeffs * phi.transpose();
}

inline Matrix separable_adjoint(const Matrix& phi, const Matrix& patch) {
  detail::require(patch.rows() == phi.rows() && patch.cols() == phi.rows(), ErrorCode::DimensionMismatch,
                  "patch must be n x n");
  return phi.transpose() * patch * phi;
}

inline Matrix separable_apply(const CroppedWaveletDictionary& d, const Matrix& coeffs) {
  return separable_apply(d.atoms, coeffs);
}

inline Matrix separable_adjoint(const CroppedWaveletDictionary& d, const Matrix& patch) {
  return separable_adjoint(d.atoms, patch);
}

// Classical (non-separable) 2-D periodic DWT: each level splits the current
// approximation block by rows then columns.

inline Matrix forward_dwt2d(const WaveletFilterPair& filter, const Matrix& image, int levels) {
  detail::require(image.rows() == image.cols(), ErrorCode::DimensionMismatch, "square images only");
  const Index size = image.rows();
  detail::check_levels(size, filter, levels);
  Matrix out = image;
  Vector buf, a, d;
  for (int lev = 0; lev < levels; ++lev) {
    const Index cur = size >> lev;
    const Index half = cur / 2;
    a.resize(half);
    d.resize(half);
    for (Index c = 0; c < cur; ++c) {
      buf = out.col(c).head(cur);
      detail::analysis_stage(filter, buf.data(), half, a.data(), d.data());
      out.col(c).head(half) = a;
      out.col(c).segment(half, half) = d;
    }
    for (Index r = 0; r < cur; ++r) {
      buf = out.row(r).head(cur).transpose();
      detail::analysis_stage(filter, buf.data(), half, a.data(), d.data());
      out.row(r).head(half) = a.transpose();
      out.row(r).segment(half, half) = d.transpose();
    }
  }
  return out;
}

inline Matrix inverse_dwt2d(const WaveletFilterPair& filter, const Matrix& coeffs, int levels) {
  detail::require(coeffs.rows() == coeffs.cols(), ErrorCode::DimensionMismatch, "square images only");
  const Index size = coeffs.rows();
  detail::check_levels(size, filter, levels);
  Matrix out = coeffs;
  Vector a, d, res;
  for (int lev = levels - 1; lev >= 0; --lev) {
    const Index cur = size >> lev;
    const Index half = cur / 2;
    res.resize(cur);
    for (Index r = 0; r < cur; ++r) {
      a = out.row(r).head(half).transpose();
      d = out.row(r).segment(half, half).transpose();
      detail::synthesis_stage(filter, a.data(), d.data(), half, res.data());
      out.row(r).head(cur) = res.transpose();
    }
    for (Index c = 0; c < cur; ++c) {
      a = out.col(c).head(half);
      d = out.col(c).segment(half, half);
      detail::synthesis_stage(filter, a.data(), d.data(), half, res.data());
      out.col(c).head(cur) = res;
    }
  }
  return out;
}

}  // namespace trainlets
