#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "trainlets/base_operator.hpp"
#include "trainlets/error.hpp"
#include "trainlets/learning.hpp"
#include "trainlets/pursuit.hpp"
#include "trainlets/sparse_dictionary.hpp"
#include "trainlets/types.hpp"
#include "trainlets/wavelets.hpp"

namespace trainlets {

// ---------------------------------------------------------------------------
// Patches and quality metrics

/// Square patches on a regular grid, fully inside the image. Patches are
/// ordered column-major over their top-left corners and vectorized
/// column-major.
struct PatchGrid {
  Index height = 0;
  Index width = 0;
  Index side = 0;
  Index stride = 1;

  PatchGrid(Index h, Index w, Index patch_side, Index step = 1) : height(h), width(w), side(patch_side), stride(step) {
    detail::require(side >= 1 && stride >= 1 && side <= h && side <= w, ErrorCode::DimensionMismatch,
                    "patch grid does not fit the image");
  }

  Index rows() const noexcept { return (height - side) / stride + 1; }
  Index cols() const noexcept { return (width - side) / stride + 1; }
  Index count() const noexcept { return rows() * cols(); }
  Index origin_row(Index i) const noexcept { return (i % rows()) * stride; }
  Index origin_col(Index i) const noexcept { return (i / rows()) * stride; }
};

inline Matrix extract_patches(const Matrix& image, const PatchGrid& grid) {
  detail::require(image.rows() == grid.height && image.cols() == grid.width, ErrorCode::DimensionMismatch,
                  "image does not match the grid");
  const Index n = grid.side;
  Matrix out(n * n, grid.count());
  for (Index i = 0; i < grid.count(); ++i) {
    const auto block = image.block(grid.origin_row(i), grid.origin_col(i), n, n);
    for (Index c = 0; c < n; ++c) out.col(i).segment(c * n, n) = block.col(c);
  }
  return out;
}

/// Closed-form minimizer in z of lambda ||z - y||^2 + sum_i ||patch_i - P_i z||^2:
/// the pixelwise weighted average (lambda y + sum_i P_i^T patch_i) / (lambda + coverage).
inline Matrix reassemble(const Matrix& patches, const PatchGrid& grid, double lambda, const Matrix& y) {
  const Index n = grid.side;
  detail::require(patches.rows() == n * n && patches.cols() == grid.count(), ErrorCode::DimensionMismatch,
                  "patch matrix does not match the grid");
  detail::require(lambda >= 0.0, ErrorCode::InvalidConfig, "lambda must be non-negative");
  if (lambda > 0.0)
    detail::require(y.rows() == grid.height && y.cols() == grid.width, ErrorCode::DimensionMismatch, "image size");
  Matrix acc = Matrix::Zero(grid.height, grid.width);
  Matrix weight = Matrix::Zero(grid.height, grid.width);
  for (Index i = 0; i < grid.count(); ++i) {
    const Index r0 = grid.origin_row(i), c0 = grid.origin_col(i);
    for (Index c = 0; c < n; ++c) {
      acc.col(c0 + c).segment(r0, n) += patches.col(i).segment(c * n, n);
      weight.col(c0 + c).segment(r0, n).array() += 1.0;
    }
  }
  if (lambda > 0.0) {
    acc += lambda * y;
    weight.array() += lambda;
  }
  detail::require((weight.array() > 0.0).all(), ErrorCode::DimensionMismatch,
                  "pixels not covered by any patch and lambda = 0");
  return acc.cwiseQuotient(weight);
}

inline constexpr double kPsnrIdentical = 999.0;

/// Peak signal-to-noise ratio in dB; identical inputs report kPsnrIdentical.
inline double psnr(const Matrix& ref, const Matrix& test, double peak = 255.0) {
  detail::require(ref.rows() == test.rows() && ref.cols() == test.cols() && ref.size() > 0,
                  ErrorCode::DimensionMismatch, "PSNR needs equally sized inputs");
  const double mse = (ref - test).squaredNorm() / static_cast<double>(ref.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

inline double psnr(const Vector& ref, const Vector& test, double peak) { return psnr(Matrix(ref), Matrix(test), peak); }

/// Random square patches (top-left corners uniform over valid positions)
/// drawn round-robin from a list of images.
inline Matrix sample_patches(const std::vector<Matrix>& images, Index side, Index count, std::uint64_t seed) {
  detail::require(!images.empty(), ErrorCode::InvalidConfig, "no images to sample from");
  std::mt19937_64 rng(seed);
  Matrix out(side * side, count);
  for (Index i = 0; i < count; ++i) {
    const Matrix& img = images[static_cast<std::size_t>(i) % images.size()];
    detail::require(img.rows() >= side && img.cols() >= side, ErrorCode::DimensionMismatch,
                    "image smaller than the patch");
    std::uniform_int_distribution<Index> rr(0, img.rows() - side), cc(0, img.cols() - side);
    const Index r0 = rr(rng), c0 = cc(rng);
    for (Index c = 0; c < side; ++c) out.col(i).segment(c * side, side) = img.col(c0 + c).segment(r0, side);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Border benchmark

/// Cubic polynomials with standard normal coefficients on a [-1, 1] grid,
/// plus a step of standard normal height starting at sample n/2, each
/// normalized to unit norm. One signal per column.
inline Matrix gen_border_signals(Index count, Index n, std::uint64_t seed, bool with_step = true) {
  detail::require(n >= 2 && n % 2 == 0, ErrorCode::InvalidSignalLength, "border signals need an even length");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix out(n, count);
  for (Index s = 0; s < count; ++s) {
    double c[4];
    for (double& v : c) v = nd(rng);
    const double step = nd(rng);
    for (Index i = 0; i < n; ++i) {
      const double t = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      double f = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
      if (with_step && i >= n / 2) f += step;
      out(i, s) = f;
    }
    const double nrm = out.col(s).norm();
    if (nrm > 0.0) out.col(s) /= nrm;
  }
  return out;
}

using Approximator = std::function<Vector(const Vector&)>;

/// M-term approximation by OMP over an explicit dictionary.
inline Approximator omp_approximator(Matrix dict, Index terms) {
  auto d = std::make_shared<const ExplicitDictionary>(std::move(dict));
  return [d, terms](const Vector& y) { return d->apply(omp(*d, y, PursuitOptions{terms, 0.0})); };
}

/// Keeps the `terms` largest coefficients of an orthonormal basis.
inline Approximator orthonormal_approximator(Matrix basis, Index terms) {
  auto w = std::make_shared<const Matrix>(std::move(basis));
  return [w, terms](const Vector& y) {
    const Vector c = w->transpose() * y;
    return Vector(*w * hard_threshold(c, terms).to_dense());
  };
}

/// Mean squared error per sample of approximating every column of `signals`.
inline Vector border_error_profile(const Matrix& signals, const Approximator& approx) {
  Vector acc = Vector::Zero(signals.rows());
  for (Index s = 0; s < signals.cols(); ++s) {
    const Vector y = signals.col(s);
    const Vector r = y - approx(y);
    detail::require(r.size() == y.size(), ErrorCode::DimensionMismatch, "approximator changed the length");
    acc += r.cwiseAbs2();
  }
  if (signals.cols() > 0) acc /= static_cast<double>(signals.cols());
  return acc;
}

struct BorderBenchResult {
  Vector periodic;
  Vector cropped;
};

/// Profiles of M-term periodic-wavelet approximation (orthonormal, at length
/// n) and M-coefficient OMP over the cropped dictionary, same filter.
inline BorderBenchResult border_benchmark(Index n, Index count, std::uint64_t seed, Index terms,
                                          const WaveletFilterPair& filter) {
  detail::require(is_power_of_two(n), ErrorCode::InvalidLength, "periodic reference needs a power-of-two length");
  const Matrix signals = gen_border_signals(count, n, seed);
  const int levels = max_wavelet_levels(n, filter.taps());
  detail::require(levels >= 1, ErrorCode::TooManyLevels, "filter longer than the signal");
  BorderBenchResult out;
  out.periodic =
      border_error_profile(signals, orthonormal_approximator(synthesis_matrix(filter, n, levels).columns, terms));
  out.cropped = border_error_profile(signals, omp_approximator(cropped_dictionary(filter, n).atoms, terms));
  return out;
}

/// Sum of a profile over the `width` outermost samples on each side.
inline double border_mass(const Vector& profile, Index width = 4) {
  return profile.head(width).sum() + profile.tail(width).sum();
}

// ---------------------------------------------------------------------------
// M-term approximation of patches

/// Approximation of a vectorized patch with a given number of terms.
using TermApproximator = std::function<Vector(const Vector&, Index)>;

struct MTermMethod {
  std::string name;
  TermApproximator approximate;
};

struct MTermResult {
  std::vector<Index> counts;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> mean_psnr;  // [method][count]
};

/// OMP with p = M over any pursuit dictionary.
template <PursuitDictionary D>
MTermMethod omp_method(std::string name, std::shared_ptr<const D> dict) {
  return {std::move(name), [dict](const Vector& y, Index m) {
            if (m == 0) return Vector(Vector::Zero(y.size()));
            return Vector(dict->apply(omp(*dict, y, PursuitOptions{m, 0.0})));
          }};
}

/// Classical 2-D periodic wavelet transform of a square patch, M largest coefficients.
inline MTermMethod dwt2d_method(std::string name, const WaveletFilterPair& filter, Index side, int levels = 0) {
  if (levels <= 0) levels = max_wavelet_levels(side, filter.taps());
  return {std::move(name), [filter, side, levels](const Vector& y, Index m) {
            Eigen::Map<const Matrix> patch(y.data(), side, side);
            const Matrix c = forward_dwt2d(filter, patch, levels);
            const Vector kept = hard_threshold(Vector(Eigen::Map<const Vector>(c.data(), c.size())), m).to_dense();
            const Matrix rec = inverse_dwt2d(filter, Eigen::Map<const Matrix>(kept.data(), side, side), levels);
            return Vector(Eigen::Map<const Vector>(rec.data(), rec.size()));
          }};
}

inline MTermResult mterm_curve(const std::vector<MTermMethod>& methods, const Matrix& patches,
                               const std::vector<Index>& counts, double peak = 1.0) {
  MTermResult res;
  res.counts = counts;
  for (const auto& m : methods) {
    res.methods.push_back(m.name);
    std::vector<double> row;
    for (Index count : counts) {
      double acc = 0.0;
      for (Index i = 0; i < patches.cols(); ++i) {
        const Vector y = patches.col(i);
        acc += psnr(y, m.approximate(y, count), peak);
      }
      row.push_back(patches.cols() > 0 ? acc / static_cast<double>(patches.cols()) : 0.0);
    }
    res.mean_psnr.push_back(std::move(row));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Denoising

enum class TrainerKind { Osdl, Batch, None };

struct DenoiseConfig {
  Index patch_side = 8;
  BaseSpec base{};  // side and dims are filled in from patch_side
  Index atoms = 0;  // 0: as many atoms as base coefficients
  TrainerKind trainer = TrainerKind::Osdl;
  TrainerConfig training{};
  double gain = 1.15;              // error threshold eps^2 = (gain * sigma)^2 * n
  double lambda_scale = 30.0;      // lambda = lambda_scale / sigma, sigma measured on a 0..255 scale
  double peak = 1.0;               // image intensity range (1 for unit-range images, 255 for 8-bit values)
  Index max_training_patches = 0;  // 0 uses every patch
  std::uint64_t seed = 0;
};

struct DenoiseResult {
  Matrix image;
  std::shared_ptr<const SparseDictionary> dict;
  double mean_atoms = 0.0;  // average code size
};

inline std::shared_ptr<const SeparableBase> make_base(BaseSpec spec, Index side, int dims) {
  spec.side = side;
  spec.dims = dims;
  if (spec.kind == BaseKind::Odct && spec.odct_atoms < side) spec.odct_atoms = side;
  return std::make_shared<const SeparableBase>(SeparableBase::from_spec(spec));
}

/// Codes every patch with the error-threshold rule and reassembles the image.
inline DenoiseResult denoise_with(const SparseDictionary& sd, const Matrix& noisy, double sigma,
                                  const DenoiseConfig& cfg) {
  detail::require(sigma > 0.0, ErrorCode::InvalidSigma, "sigma must be positive");
  const PatchGrid grid(noisy.rows(), noisy.cols(), cfg.patch_side);
  const Matrix patches = extract_patches(noisy, grid);
  const Index n = patches.rows();
  const double eps = cfg.gain * sigma * std::sqrt(static_cast<double>(n));
  const EffectiveGram g = gram_full(sd);
  Matrix clean(n, patches.cols());
  double atoms_used = 0.0;
  for (Index i = 0; i < patches.cols(); ++i) {
    const Vector y = patches.col(i);
    const SparseVec x = batch_omp(g.g, sd.adjoint(y), y.squaredNorm(), n / 2, eps);
    atoms_used += static_cast<double>(x.nnz());
    clean.col(i) = sd.apply(x);
  }
  DenoiseResult out;
  const double sigma8 = sigma * 255.0 / cfg.peak;
  out.image = reassemble(clean, grid, cfg.lambda_scale / sigma8, noisy);
  out.mean_atoms = atoms_used / static_cast<double>(std::max<Index>(patches.cols(), 1));
  return out;
}

/// Initial dictionary for denoising: near-identity over the base coefficients.
inline SparseDictionary initial_dictionary(const DenoiseConfig& cfg) {
  const auto base = make_base(cfg.base, cfg.patch_side, 2);
  const Index atoms = cfg.atoms > 0 ? cfg.atoms : base->atom_count();
  return SparseDictionary::identity_init(base, atoms, cfg.training.atom_sparsity, cfg.seed);
}

/// Single pass: extract all overlapping patches, train (or not) on them, code
/// each with the error threshold, and average back with the noisy image.
inline DenoiseResult denoise(const Matrix& noisy, double sigma, const DenoiseConfig& cfg) {
  detail::require(sigma > 0.0, ErrorCode::InvalidSigma, "sigma must be positive");
  SparseDictionary sd = initial_dictionary(cfg);
  if (cfg.trainer != TrainerKind::None) {
    const PatchGrid grid(noisy.rows(), noisy.cols(), cfg.patch_side);
    Matrix train = extract_patches(noisy, grid);
    if (cfg.max_training_patches > 0 && train.cols() > cfg.max_training_patches) {
      std::vector<Index> idx(static_cast<std::size_t>(train.cols()));
      std::iota(idx.begin(), idx.end(), Index{0});
      std::mt19937_64 rng(cfg.seed + 1);
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(cfg.max_training_patches));
      std::sort(idx.begin(), idx.end());
      Matrix sub(train.rows(), cfg.max_training_patches);
      for (std::size_t i = 0; i < idx.size(); ++i) sub.col(static_cast<Index>(i)) = train.col(idx[i]);
      train = std::move(sub);
    }
    if (cfg.trainer == TrainerKind::Osdl)
      sd = osdl_train(train, std::move(sd), cfg.training);
    else
      sd = batch_learn(train, std::move(sd), cfg.training).dict;
  }
  DenoiseResult out = denoise_with(sd, noisy, sigma, cfg);
  out.dict = std::make_shared<const SparseDictionary>(std::move(sd));
  return out;
}

/// Adds white Gaussian noise of standard deviation sigma.
inline Matrix add_noise(const Matrix& image, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  Matrix out = image;
  for (Index c = 0; c < out.cols(); ++c)
    for (Index r = 0; r < out.rows(); ++r) out(r, c) += nd(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Compression

/// Whole-image OMP at each coefficient budget; table[image][budget] in dB.
template <PursuitDictionary D>
std::vector<std::vector<double>> compress_eval(const D& dict, const std::vector<Matrix>& images,
                                               const std::vector<Index>& budgets, double peak = 1.0) {
  std::vector<std::vector<double>> table;
  for (const Matrix& img : images) {
    detail::require(img.size() == dict.signal_dim(), ErrorCode::DimensionMismatch,
                    "image size does not match the dictionary");
    const Vector y = Eigen::Map<const Vector>(img.data(), img.size());
    std::vector<double> row;
    for (Index b : budgets) {
      const Vector rec =
          b > 0 ? Vector(dict.apply(omp(dict, y, PursuitOptions{b, 0.0}))) : Vector(Vector::Zero(y.size()));
      row.push_back(psnr(y, rec, peak));
    }
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace trainlets
