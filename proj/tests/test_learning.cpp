#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "trainlets/learning.hpp"

using namespace trainlets;
using namespace trainlets::testing;

namespace {

std::vector<Index> iota_vec(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

// Random dense-ish dictionary with every column holding up to k entries.
SparseDictionary random_dictionary(std::shared_ptr<const SeparableBase> base, Index m, Index k, std::mt19937_64& rng) {
  std::vector<SparseVec> cols;
  for (Index j = 0; j < m; ++j) cols.push_back(hard_threshold(Vector(gaussian(base->atom_count(), 1, rng).col(0)), k));
  SparseDictionary sd(std::move(base), std::move(cols), k);
  for (Index j = 0; j < m; ++j) sd.renormalize(j);
  return sd;
}

TrainerConfig small_config() {
  TrainerConfig cfg;
  cfg.atom_sparsity = 4;
  cfg.code_sparsity = 3;
  cfg.batch_size = 32;
  cfg.maintenance_period = 0;
  return cfg;
}

}  // namespace

TEST(GradDict, ZeroForEmptyCodesAndPerfectFit) {
  std::mt19937_64 rng(1);
  const auto base = cropped_base(8, 1);
  const auto sd = random_dictionary(base, 12, 4, rng);
  SparseCodeMatrix x;
  x.dim = 12;
  x.codes.assign(10, SparseVec(12));
  const Matrix y = gaussian(8, 10, rng);
  const auto atoms = iota_vec(12);
  EXPECT_EQ(grad_dict(sd, y, x, atoms).cwiseAbs().maxCoeff(), 0.0);

  const SparseCodeMatrix x2 = random_codes(12, 10, 3, rng);
  EXPECT_LT(grad_dict(sd, synthesize(sd, x2), x2, atoms).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradDict, MatchesCentralFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int dims : {1, 2}) {
    const auto base = cropped_base(dims == 1 ? 12 : 4, dims);
    const Index l = base->atom_count();
    const auto sd0 = random_dictionary(base, 7, l, rng);
    const SparseCodeMatrix x = random_codes(7, 15, 3, rng);
    const Matrix y = gaussian(base->signal_dim(), 15, rng);
    const std::vector<Index> atoms{1, 4, 6};
    const Matrix g = grad_dict(sd0, y, x, atoms);
    const double h = 1e-6;
    for (std::size_t s = 0; s < atoms.size(); ++s) {
      const Index j = atoms[s];
      double worst = 0;
      for (Index r = 0; r < l; r += std::max<Index>(1, l / 9)) {
        auto plus = sd0, minus = sd0;
        Vector a = sd0.coeffs(j).to_dense();
        a[r] += h;
        plus.set_coeffs(j, SparseVec::from_dense(a));
        a[r] -= 2 * h;
        minus.set_coeffs(j, SparseVec::from_dense(a));
        const double fd = (objective(plus, y, x) - objective(minus, y, x)) / (2 * h);
        worst = std::max(worst, std::abs(fd - g(r, static_cast<Index>(s))) / std::max(1.0, std::abs(fd)));
      }
      EXPECT_LT(worst, 1e-5) << "dims " << dims << " atom " << j;
    }
  }
}

TEST(Niht, StationaryWhenResidualIsTheAtom) {
  std::mt19937_64 rng(3);
  const auto base = cropped_base(8, 1);
  const SparseVec a = hard_threshold(Vector(gaussian(base->atom_count(), 1, rng).col(0)), 3);
  const Vector xj = gaussian(20, 1, rng).col(0);
  const Matrix ej = base->apply(a) * xj.transpose();
  const NihtResult r = atom_update_niht(ej, *base, a, xj, 3);
  EXPECT_EQ(r.atom.support, a.support);
  for (std::size_t i = 0; i < a.nnz(); ++i) EXPECT_NEAR(r.atom.values[i], a.values[i], 1e-12);
}

TEST(Niht, ZeroUsageLeavesAtom) {
  const auto base = cropped_base(8, 1);
  SparseVec a(base->atom_count());
  a.support = {2};
  a.values = {1.0};
  const NihtResult r = atom_update_niht(Matrix::Ones(8, 5), *base, a, Vector::Zero(5), 3);
  EXPECT_EQ(r.status, NihtStatus::ZeroUsage);
  EXPECT_EQ(r.atom, a);
}

TEST(Niht, FixedSupportStepIsLineMinimum) {
  std::mt19937_64 rng(4);
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto base = cropped_base(rep % 2 ? 8 : 12, 1);
    const Index l = base->atom_count();
    const Index nnz = 1 + rep % 5;
    const SparseVec a_sparse = hard_threshold(Vector(gaussian(l, 1, rng).col(0)), nnz);
    const Matrix ej = gaussian(base->signal_dim(), 30, rng);
    const Vector xj = gaussian(30, 1, rng).col(0);
    const AtomProblem prob = make_atom_problem(*base, ej, xj);
    // Sparse start with exactly |support| slots, and a dense start with no
    // thresholding at all.
    const SparseVec dense = SparseVec::from_dense(Vector(gaussian(l, 1, rng).col(0)));
    for (Index k : {static_cast<Index>(a_sparse.nnz()), l}) {
      const SparseVec& a = k == l ? dense : a_sparse;
      const NihtResult r = niht_atom_step(prob, a, k, 0.5);
      ASSERT_EQ(r.status, NihtStatus::Accepted);
      const Vector g = prob.gradient(a);
      const Vector dir = k == l ? g : [&] {
        Vector d = Vector::Zero(l);
        for (Index i : a.support) d[i] = g[i];
        return d;
      }();
      if (k < l && (r.atom.support != a.support || r.backtracks > 0)) continue;
      ASSERT_EQ(r.backtracks, 0);
      const double eta = r.step;
      const auto cost_at = [&](double t) { return prob.cost(SparseVec::from_dense(Vector(a.to_dense() - t * dir))); };
      for (double f : {0.5, 0.9, 1.1, 1.5}) EXPECT_LE(cost_at(eta), cost_at(f * eta) + 1e-12);
      ++checked;
    }
  }
  EXPECT_GE(checked, 100);
}

TEST(Niht, IteratesMonotonicallyToConvergence) {
  std::mt19937_64 rng(5);
  const auto base = cropped_base(12, 1);
  const Matrix ej = gaussian(12, 40, rng);
  const Vector xj = gaussian(40, 1, rng).col(0);
  const AtomProblem prob = make_atom_problem(*base, ej, xj);
  SparseVec a = hard_threshold(Vector(gaussian(base->atom_count(), 1, rng).col(0)), 4);
  double prev = prob.cost(a);
  double delta = 1;
  // Fixed-support steepest descent converges linearly; on this instance the
  // contraction is slow, so the tight tolerance needs more than 50 steps.
  for (int it = 0; it < 400; ++it) {
    const NihtResult r = niht_atom_step(prob, a, 4, 0.5);
    ASSERT_LE(r.cost_after, prev + 1e-12);
    delta = prev - r.cost_after;
    prev = r.cost_after;
    a = r.atom;
    ASSERT_LE(static_cast<Index>(a.nnz()), 4);
    if (it == 49) EXPECT_LT(delta, 1e-4 * std::abs(prev));
  }
  EXPECT_LT(delta, 1e-12);
}

TEST(BatchLearn, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(6);
  const auto base = cropped_base(16, 1);
  const auto a0 = SparseDictionary::identity_init(base, 24, 4, 7);
  const Matrix y = gaussian(16, 200, rng);
  TrainerConfig cfg = small_config();
  cfg.batch_iterations = 20;
  const auto res = batch_learn(y, a0, cfg);
  ASSERT_EQ(res.cost_history.size(), 41u);
  for (std::size_t i = 1; i < res.cost_history.size(); ++i)
    EXPECT_LE(res.cost_history[i], res.cost_history[i - 1] + 1e-10) << "half-step " << i;

  // Strictly better than coding with the initial dictionary held fixed.
  SparseCodeMatrix fixed;
  fixed.dim = 24;
  for (Index i = 0; i < 200; ++i) fixed.codes.push_back(omp(a0, Vector(y.col(i)), {cfg.code_sparsity, 0.0}));
  EXPECT_LT(res.cost_history.back(), objective(a0, y, fixed) * 0.99);
  for (Index j = 0; j < 24; ++j) {
    EXPECT_NEAR(res.dict.atom_norm(j), 1.0, 1e-10);
    EXPECT_LE(static_cast<Index>(res.dict.coeffs(j).nnz()), 4);
  }
}

TEST(BatchLearn, ConsistentDataReachesZeroCost) {
  std::mt19937_64 rng(8);
  const auto base = cropped_base(16, 1);
  const auto a0 = random_dictionary(base, 20, 4, rng);
  const SparseCodeMatrix x0 = random_codes(20, 100, 1, rng);
  const Matrix y = synthesize(a0, x0);
  TrainerConfig cfg = small_config();
  cfg.code_sparsity = 1;
  cfg.batch_iterations = 3;
  const auto res = batch_learn(y, a0, cfg);
  for (std::size_t i = 1; i < res.cost_history.size(); ++i) EXPECT_LT(res.cost_history[i], 1e-10);
}

TEST(StochasticNiht, RepeatedConsistentExampleDrivesCostToZero) {
  std::mt19937_64 rng(9);
  const auto base = cropped_base(12, 1);
  const auto target = random_dictionary(base, 6, 3, rng);
  SparseVec code(6);
  code.support = {2};
  code.values = {1.7};
  const Matrix y = target.apply(code).replicate(1, 1);
  auto a0 = SparseDictionary::identity_init(base, 6, 3, 1);
  TrainerConfig cfg = small_config();
  cfg.atom_sparsity = 3;
  cfg.code_sparsity = 1;
  cfg.niht_iterations = 5;
  ShuffledSampleStream stream(y, 200, 1);
  const auto res = stochastic_niht_train(stream, a0, cfg, 0.0);
  const SparseVec x = omp(res.dict, Vector(y.col(0)), {1, 0.0});
  EXPECT_LT((y.col(0) - res.dict.apply(x)).norm(), 1e-6 * y.norm());
}

TEST(StochasticNiht, SingleAtomFollowsNihtTrajectory) {
  std::mt19937_64 rng(10);
  const auto base = cropped_base(8, 1);
  const Vector y = gaussian(8, 1, rng).col(0);
  const auto a0 = SparseDictionary::identity_init(base, 1, 3, 2);
  TrainerConfig cfg = small_config();
  cfg.atom_sparsity = 3;
  cfg.code_sparsity = 1;
  const Matrix ym = y;
  ShuffledSampleStream stream(ym, 1, 0);
  const auto res = stochastic_niht_train(stream, a0, cfg, 0.0);

  const SparseVec x = omp(a0, y, {1, 0.0});
  const AtomProblem prob{&a0.base(), y * x.values[0], x.values[0] * x.values[0]};
  NihtResult ref = niht_atom_step(prob, a0.coeffs(0), 3, 0.5);
  SparseDictionary expect = a0;
  expect.set_coeffs(0, ref.atom);
  expect.renormalize(0);
  EXPECT_EQ(res.dict.coeffs(0).support, expect.coeffs(0).support);
  for (std::size_t i = 0; i < expect.coeffs(0).nnz(); ++i)
    EXPECT_NEAR(res.dict.coeffs(0).values[i], expect.coeffs(0).values[i], 1e-14);
}

TEST(OsdlStepSize, ScaleInvariantAndIsometric) {
  std::mt19937_64 rng(11);
  const auto base = cropped_base(8, 1);
  const Matrix g = gaussian(base->atom_count(), 3, rng);
  std::vector<CodeRow> rows(3);
  std::uniform_int_distribution<Index> ex(0, 9);
  for (auto& r : rows)
    for (int i = 0; i < 4; ++i) r.emplace_back(ex(rng), gaussian(1, 1, rng)(0, 0));
  const double e1 = *osdl_step_size(g, *base, rows, 10);
  EXPECT_NEAR(*osdl_step_size(3.7 * g, *base, rows, 10), e1, 1e-12 * e1);
  const double niht = *niht_block_step_size(g, *base, rows, 10);
  EXPECT_NEAR(e1, std::sqrt(niht), 1e-12 * e1);

  // Orthonormal base, one atom used once with unit weight.
  const auto f = wavelet_filters(WaveletFamily::Daubechies, 2);
  const SeparableBase ortho(synthesis_matrix(f, 16, 2).columns, 1);
  const Matrix g1 = gaussian(16, 1, rng);
  const std::vector<CodeRow> one{{{0, 1.0}}};
  EXPECT_NEAR(*osdl_step_size(g1, ortho, one, 1), 1.0, 1e-12);
  EXPECT_FALSE(osdl_step_size(Matrix::Zero(16, 1), ortho, one, 1).has_value());
}

TEST(Osdl, GramStaysInSyncWithDictionary) {
  std::mt19937_64 rng(12);
  const auto base = cropped_base(6, 2);
  TrainerConfig cfg;
  cfg.atom_sparsity = 5;
  cfg.code_sparsity = 3;
  cfg.batch_size = 16;
  cfg.maintenance_period = 7;
  TrainerState st(SparseDictionary::identity_init(base, 50, 5, 3), 1);
  for (int t = 0; t < 100; ++t) {
    const Matrix y = gaussian(36, 16, rng);
    osdl_step(st, y, cfg, 100.0);
    for (Index j = 0; j < 50; ++j) ASSERT_LE(static_cast<Index>(st.dict.coeffs(j).nnz()), 5);
  }
  EXPECT_LT((st.gram.g - gram_full(st.dict).g).cwiseAbs().maxCoeff(), 1e-8);
  for (Index j = 0; j < 50; ++j) EXPECT_NEAR(st.dict.atom_norm(j), 1.0, 1e-10);
}

TEST(Osdl, DeterministicForSeed) {
  std::mt19937_64 rng(13);
  const auto base = cropped_base(6, 2);
  const Matrix y = gaussian(36, 300, rng);
  TrainerConfig cfg;
  cfg.atom_sparsity = 4;
  cfg.code_sparsity = 2;
  cfg.batch_size = 32;
  cfg.epochs = 2;
  cfg.seed = 77;
  const auto a0 = SparseDictionary::identity_init(base, 40, 4, 1);
  const auto d1 = osdl_train(y, a0, cfg);
  const auto d2 = osdl_train(y, a0, cfg);
  for (Index j = 0; j < 40; ++j) EXPECT_EQ(d1.coeffs(j), d2.coeffs(j));
  cfg.seed = 78;
  const auto d3 = osdl_train(y, a0, cfg);
  bool differs = false;
  for (Index j = 0; j < 40; ++j) differs |= !(d1.coeffs(j) == d3.coeffs(j));
  EXPECT_TRUE(differs);
}

TEST(Osdl, DegenerateSettingsFollowProjectedGradient) {
  // gamma = 0, N = 1, k = L': one update is a plain gradient step with the
  // global step, followed by renormalization.
  std::mt19937_64 rng(14);
  const auto base = cropped_base(8, 1);
  const Index l = base->atom_count();
  TrainerConfig cfg;
  cfg.atom_sparsity = l;
  cfg.code_sparsity = 1;
  cfg.batch_size = 1;
  cfg.momentum = 0.0;
  cfg.maintenance_period = 0;
  const auto a0 = random_dictionary(base, 5, l, rng);
  TrainerState st(a0, 0);
  const Matrix y = gaussian(8, 1, rng);
  const SparseVec x = omp(a0, Vector(y.col(0)), {1, 0.0});
  const Index j = x.support[0];
  SparseCodeMatrix xm;
  xm.dim = 5;
  xm.codes = {x};
  const Matrix g = grad_dict(a0, y, xm, std::vector<Index>{j});
  const std::vector<CodeRow> rows{{{0, x.values[0]}}};
  const double eta = *osdl_step_size(g, *base, rows, 1);
  osdl_step(st, y, cfg, 1e300);
  Vector expect = a0.coeffs(j).to_dense() - eta * g.col(0);
  expect /= (base->apply(expect)).norm();
  EXPECT_LT((st.dict.coeffs(j).to_dense() - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReplaceAndPrune, IdentityWhenHealthy) {
  std::mt19937_64 rng(15);
  const auto base = cropped_base(8, 2);
  TrainerState st(random_dictionary(base, 20, 4, rng), 0);
  std::fill(st.usage.begin(), st.usage.end(), 5);
  const auto before = st.dict.columns();
  const Matrix recent = gaussian(64, 10, rng);
  std::vector<double> norms(10, 1.0);
  TrainerConfig cfg;
  const auto rep = replace_and_prune(st, recent, norms, cfg);
  EXPECT_TRUE(rep.replaced.empty());
  EXPECT_EQ(st.dict.columns(), before);
}

TEST(ReplaceAndPrune, DuplicatePairLosesExactlyOneAtom) {
  std::mt19937_64 rng(16);
  const auto base = cropped_base(8, 2);
  TrainerState st(random_dictionary(base, 20, 4, rng), 0);
  st.dict.set_coeffs(9, st.dict.coeffs(3));
  gram_update(st.gram, st.dict, std::vector<Index>{9});
  std::fill(st.usage.begin(), st.usage.end(), 5);
  const Matrix recent = gaussian(64, 10, rng);
  std::vector<double> norms(10);
  for (Index i = 0; i < 10; ++i) norms[static_cast<std::size_t>(i)] = recent.col(i).norm();
  TrainerConfig cfg;
  const auto rep = replace_and_prune(st, recent, norms, cfg);
  EXPECT_EQ(rep.replaced, (std::vector<Index>{9}));
  EXPECT_LT(std::abs(st.gram.g(3, 9)), 0.99);
  EXPECT_LT((st.gram.g - gram_full(st.dict).g).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(st.dict.atom_norm(9), 1.0, 1e-10);
}

TEST(ReplaceAndPrune, DeadAtomIsReplacedAfterOneCycle) {
  // Data lives in the span of atoms 0..7 of a 1-D orthonormal base; atom 8
  // points elsewhere and is never selected.
  const auto f = wavelet_filters(WaveletFamily::Daubechies, 2);
  auto base = std::make_shared<const SeparableBase>(synthesis_matrix(f, 16, 2).columns, 1);
  std::vector<SparseVec> cols;
  for (Index j = 0; j < 9; ++j) {
    SparseVec e(16);
    e.support = {j == 8 ? 15 : j};
    e.values = {1.0};
    cols.push_back(e);
  }
  TrainerConfig cfg;
  cfg.atom_sparsity = 1;
  cfg.code_sparsity = 8;
  cfg.batch_size = 20;
  cfg.maintenance_period = 1;
  cfg.unused_threshold = 1;
  TrainerState st(SparseDictionary(base, cols, 1), 0);
  std::mt19937_64 rng(17);
  Matrix y = base->phi1d().leftCols(8) * gaussian(8, 20, rng);
  // One example outside the span so a replacement candidate exists.
  y.col(3) += 5.0 * base->phi1d().col(12);
  const SparseVec old = st.dict.coeffs(8);
  // One maintenance window: usage comes from coding the batch.
  const SparseCodeMatrix x = code_batch(st.dict, st.gram.g, y, cfg.code_sparsity);
  for (const auto& c : x.codes)
    for (Index j : c.support) ++st.usage[static_cast<std::size_t>(j)];
  const Matrix r = residual_matrix(st.dict, y, x);
  std::vector<double> norms(20);
  for (Index i = 0; i < 20; ++i) norms[static_cast<std::size_t>(i)] = r.col(i).norm();
  const auto rep = replace_and_prune(st, y, norms, cfg);
  EXPECT_EQ(rep.unused, (std::vector<Index>{8}));
  EXPECT_EQ(rep.replaced, (std::vector<Index>{8}));
  EXPECT_NE(st.dict.coeffs(8), old);
  EXPECT_EQ(st.dict.coeffs(8).support, (std::vector<Index>{12}));
  EXPECT_LT((st.gram.g - gram_full(st.dict).g).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TrainerConfig, ValidationRejectsBadValues) {
  TrainerConfig cfg;
  cfg.momentum = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainerConfig{};
  cfg.backtrack = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainerConfig{};
  cfg.batch_size = 0;
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}
