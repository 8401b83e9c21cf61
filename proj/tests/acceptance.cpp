// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only N[,N...]] [--known-failures N[,N...]]
//
// Exit status is 0 when every failing criterion is listed as a known failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trainlets/trainlets.hpp"

using namespace trainlets;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string data_path(const std::string& rel) { return std::string(TRAINLETS_DATA_DIR) + "/" + rel; }

std::vector<Matrix> corpus() {
  std::vector<Matrix> out;
  for (const auto& p : list_pgm_files(data_path("images"))) out.push_back(read_pgm(p));
  return out;
}

Matrix gaussian(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

std::shared_ptr<const SeparableBase> cropped(Index side, int dims, int order = 4) {
  BaseSpec spec;
  spec.order = order;
  return make_base(spec, side, dims);
}

SparseCodeMatrix random_codes(Index atoms, Index examples, Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  SparseCodeMatrix x;
  x.dim = atoms;
  std::vector<Index> idx(static_cast<std::size_t>(atoms));
  for (Index e = 0; e < examples; ++e) {
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    Vector v = Vector::Zero(atoms);
    for (Index i = 0; i < p; ++i) v[idx[static_cast<std::size_t>(i)]] = nd(rng);
    x.codes.push_back(SparseVec::from_dense(v));
  }
  return x;
}

Matrix synthesize(const SparseDictionary& sd, const SparseCodeMatrix& x) {
  Matrix y(sd.signal_dim(), x.examples());
  for (Index e = 0; e < x.examples(); ++e) y.col(e) = sd.apply(x.codes[static_cast<std::size_t>(e)]);
  return y;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// --- 1 -------------------------------------------------------------------

Outcome border_benchmark_criterion() {
  const auto t0 = Clock::now();
  // Closest even-length Daubechies filter to the 13 taps used for the figure.
  const auto res = border_benchmark(64, 1000, 7, 5, wavelet_filters(WaveletFamily::Daubechies, 7));
  const double secs = seconds_since(t0);
  const double ratio = border_mass(res.cropped) / border_mass(res.periodic);
  Index peak_p = 0, peak_c = 0;
  res.periodic.maxCoeff(&peak_p);
  res.cropped.maxCoeff(&peak_c);
  // Center of 64 samples lies between 31 and 32; +-1 admits 30..33.
  const auto near_center = [](Index i) { return i >= 30 && i <= 33; };
  const bool pass = ratio < 0.5 && near_center(peak_p) && near_center(peak_c) && secs < 30.0;
  return {pass, fmt("border ratio %.3f (< 0.5), peaks periodic %ld cropped %ld (want 30..33), %.1fs", ratio,
                    static_cast<long>(peak_p), static_cast<long>(peak_c), secs)};
}

// --- 2 -------------------------------------------------------------------

Outcome mterm_ordering_criterion() {
  const auto t0 = Clock::now();
  const Index side = 64;
  // The figure averages 1000 patches; at 200 the M=25 gap hovers near the 0.1 dB bar.
  const Index count = 1000;
  const Matrix patches = sample_patches(corpus(), side, count, 1);
  const auto filter = wavelet_filters(WaveletFamily::Symlet, 4);
  BaseSpec spec;
  spec.kind = BaseKind::PeriodicWavelet;
  const auto res = mterm_curve({omp_method("cropped", cropped(side, 2)),
                                omp_method("separable", make_base(spec, side, 2)), dwt2d_method("dwt2d", filter, side)},
                               patches, {25, 50, 100});
  const double secs = seconds_since(t0);
  bool pass = secs < 300.0;
  std::string detail;
  for (std::size_t c = 0; c < res.counts.size(); ++c) {
    const double a = res.mean_psnr[0][c], b = res.mean_psnr[1][c], d = res.mean_psnr[2][c];
    pass = pass && a - b > 0.1 && b - d > 0.1;
    detail += fmt("M=%ld: %.2f > %.2f > %.2f; ", static_cast<long>(res.counts[c]), a, b, d);
  }
  return {pass, detail + fmt("%ld patches, %.1fs", static_cast<long>(count), secs)};
}

// --- 3 -------------------------------------------------------------------

Outcome redundancy_criterion() {
  const Index n = 64;
  const auto d = cropped_dictionary(wavelet_filters(WaveletFamily::Symlet, 4), n);
  const double r = static_cast<double>(d.atoms.cols()) / static_cast<double>(n);
  return {r >= 1.6 && r <= 1.9,
          fmt("sym4 (8 taps) at n=64: %ld columns = %.3f n (want 1.6n..1.9n)", static_cast<long>(d.atoms.cols()), r)};
}

// --- 4 -------------------------------------------------------------------

Outcome batch_monotone_criterion() {
  std::mt19937_64 rng(4);
  const auto base = cropped(16, 1);
  const Matrix y = gaussian(16, 200, rng);
  TrainerConfig cfg;
  cfg.atom_sparsity = 4;
  cfg.code_sparsity = 3;
  cfg.batch_iterations = 20;
  const auto res = batch_learn(y, SparseDictionary::identity_init(base, 24, 4, 4), cfg);
  double worst = -INFINITY;
  for (std::size_t i = 1; i < res.cost_history.size(); ++i)
    worst = std::max(worst, res.cost_history[i] - res.cost_history[i - 1]);
  return {worst <= 1e-10, fmt("%zu half-steps, largest increase %.3g (tol 1e-10), cost %.4f -> %.4f",
                              res.cost_history.size() - 1, worst, res.cost_history.front(), res.cost_history.back())};
}

// --- 5 -------------------------------------------------------------------

double planted_ratio(std::uint64_t seed, double* secs) {
  std::mt19937_64 rng(seed);
  const auto base = cropped(16, 1);
  const Index l = base->atom_count(), m = 20, k = 3, p = 3;
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<Index> pick(0, l - 1);
  std::vector<SparseVec> cols;
  for (Index j = 0; j < m; ++j) {
    Vector a = Vector::Zero(l);
    for (Index placed = 0; placed < k;) {
      const Index r = pick(rng);
      if (a[r] != 0.0) continue;
      a[r] = nd(rng);
      ++placed;
    }
    cols.push_back(SparseVec::from_dense(a));
  }
  SparseDictionary planted(base, cols, k);
  for (Index j = 0; j < m; ++j) planted.renormalize(j);
  const Matrix train = synthesize(planted, random_codes(m, 5000, p, rng));
  const Matrix held_out = synthesize(planted, random_codes(m, 1000, p, rng));

  const auto a0 = SparseDictionary::identity_init(base, m, k, seed + 7);
  TrainerConfig cfg;
  cfg.atom_sparsity = k;
  cfg.code_sparsity = p;
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.momentum = 0.0;
  cfg.seed = seed;
  const auto t0 = Clock::now();
  const auto trained = osdl_train(train, a0, cfg);
  if (secs) *secs = seconds_since(t0);
  return coding_mse(trained, gram_full(trained).g, held_out, p) / coding_mse(a0, gram_full(a0).g, held_out, p);
}

Outcome planted_recovery_criterion() {
  double secs = 0.0;
  const double ratio = planted_ratio(0, &secs);
  std::string spread;
  for (std::uint64_t s = 1; s <= 4; ++s) spread += fmt(" %.3f", planted_ratio(s, nullptr));
  return {ratio < 0.1 && secs < 120.0, fmt("held-out MSE ratio %.4f after 3 epochs (want < 0.1), %.2fs; other seeds:%s",
                                           ratio, secs, spread.c_str())};
}

// --- 6 -------------------------------------------------------------------

// Plain OMP oracle: least squares re-solved from scratch at every step.
SparseVec naive_omp(const Matrix& d, const Vector& y, Index p) {
  std::vector<Index> sel;
  Vector r = y, coef;
  for (Index it = 0; it < p; ++it) {
    const Vector c = d.transpose() * r;
    Index best = -1;
    for (Index j = 0; j < c.size(); ++j) {
      if (std::find(sel.begin(), sel.end(), j) != sel.end()) continue;
      if (best < 0 || std::abs(c[j]) > std::abs(c[best])) best = j;
    }
    sel.push_back(best);
    Matrix ds(d.rows(), static_cast<Index>(sel.size()));
    for (std::size_t i = 0; i < sel.size(); ++i) ds.col(static_cast<Index>(i)) = d.col(sel[i]);
    coef = ds.colPivHouseholderQr().solve(y);
    r = y - ds * coef;
  }
  Vector dense = Vector::Zero(d.cols());
  for (std::size_t i = 0; i < sel.size(); ++i) dense[sel[i]] = coef[static_cast<Index>(i)];
  return SparseVec::from_dense(dense);
}

Outcome oracle_criterion() {
  std::mt19937_64 rng(6);
  std::string detail;
  bool pass = true;

  int omp_ok = 0;
  double omp_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    Matrix d = gaussian(40, 80, rng);
    d.colwise().normalize();
    const Vector y = gaussian(40, 1, rng).col(0);
    const SparseVec ref = naive_omp(d, y, 8);
    const SparseVec got = batch_omp(d.transpose() * d, d.transpose() * y, y.squaredNorm(), 8, 0.0);
    bool same = got.support == ref.support;
    if (same)
      for (std::size_t i = 0; i < ref.nnz(); ++i) omp_err = std::max(omp_err, std::abs(got.values[i] - ref.values[i]));
    omp_ok += same;
  }
  pass = pass && omp_ok == 100 && omp_err <= 1e-8;
  detail += fmt("batch OMP %d/100 supports, value err %.1e; ", omp_ok, omp_err);

  {
    const auto base = cropped(8, 2);
    TrainerState st(SparseDictionary::identity_init(base, 120, 5, 1), 1);
    TrainerConfig cfg;
    cfg.atom_sparsity = 5;
    cfg.code_sparsity = 4;
    cfg.maintenance_period = 7;
    for (int b = 0; b < 100; ++b) osdl_step(st, gaussian(64, 32, rng), cfg, 50.0);
    const double err = (st.gram.g - gram_full(st.dict).g).cwiseAbs().maxCoeff();
    pass = pass && err <= 1e-8;
    detail += fmt("Gram after 100 batches %.1e; ", err);
  }

  {
    const auto base = cropped(8, 2);
    const Matrix& phi = base->phi1d();
    Matrix kron(64, phi.cols() * phi.cols());
    for (Index j = 0; j < phi.cols(); ++j)
      for (Index i = 0; i < phi.cols(); ++i)
        for (Index c = 0; c < 8; ++c)
          for (Index r = 0; r < 8; ++r) kron(c * 8 + r, j * phi.cols() + i) = phi(r, i) * phi(c, j);
    double err = 0.0;
    for (int t = 0; t < 10; ++t) {
      const Vector c = gaussian(kron.cols(), 1, rng).col(0);
      err = std::max(err, (base->apply(c) - kron * c).cwiseAbs().maxCoeff());
    }
    pass = pass && err <= 1e-10;
    detail += fmt("separable vs Kronecker %.1e; ", err);
  }

  {
    const auto base = cropped(12, 1);
    const Index l = base->atom_count();
    const auto sd = SparseDictionary::identity_init(base, 6, l, 2);
    const SparseCodeMatrix x = random_codes(6, 20, 3, rng);
    const Matrix y = gaussian(12, 20, rng);
    const std::vector<Index> atoms{0, 3, 5};
    const Matrix g = grad_dict(sd, y, x, atoms);
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t s = 0; s < atoms.size(); ++s)
      for (Index r = 0; r < l; ++r) {
        auto plus = sd, minus = sd;
        Vector a = sd.coeffs(atoms[s]).to_dense();
        a[r] += h;
        plus.set_coeffs(atoms[s], SparseVec::from_dense(a));
        a[r] -= 2 * h;
        minus.set_coeffs(atoms[s], SparseVec::from_dense(a));
        const double fd = (objective(plus, y, x) - objective(minus, y, x)) / (2 * h);
        worst = std::max(worst, std::abs(fd - g(r, static_cast<Index>(s))) / std::max(1.0, std::abs(fd)));
      }
    pass = pass && worst <= 1e-5;
    detail += fmt("gradient vs finite differences %.1e", worst);
  }
  return {pass, detail};
}

// --- 7 -------------------------------------------------------------------

Outcome hard_threshold_criterion() {
  std::mt19937_64 rng(7);
  long checked = 0;
  double worst_gap = 0.0;
  for (Index dim = 1; dim <= 10; ++dim)
    for (Index k = 0; k <= std::min<Index>(3, dim); ++k)
      for (int t = 0; t < 30; ++t) {
        Vector v = gaussian(dim, 1, rng).col(0);
        if (t % 3 == 0) v = v.array().round();  // ties
        const double got = (v - hard_threshold(v, k).to_dense()).squaredNorm();
        // Best k-sparse approximation on every support of size k.
        double best = INFINITY;
        std::vector<char> mask(static_cast<std::size_t>(dim), 0);
        std::fill(mask.end() - k, mask.end(), 1);
        do {
          double d = 0.0;
          for (Index i = 0; i < dim; ++i)
            if (!mask[static_cast<std::size_t>(i)]) d += v[i] * v[i];
          best = std::min(best, d);
        } while (std::next_permutation(mask.begin(), mask.end()));
        worst_gap = std::max(worst_gap, got - best);
        ++checked;
      }
  return {worst_gap <= 1e-12, fmt("%ld vectors, dims 1..10, k 0..3, worst excess distance %.1e", checked, worst_gap)};
}

// --- 8 -------------------------------------------------------------------

Outcome niht_step_criterion() {
  std::mt19937_64 rng(8);
  int checked = 0, ok = 0;
  for (int t = 0; checked < 100 && t < 1000; ++t) {
    const auto base = cropped(t % 2 ? 8 : 4, t % 2 ? 1 : 2);
    const Index l = base->atom_count();
    const SparseVec a = SparseVec::from_dense(Vector(gaussian(l, 1, rng).col(0)));
    const Vector xj = gaussian(12, 1, rng).col(0);
    const Matrix ej = gaussian(base->signal_dim(), 12, rng);
    const AtomProblem prob = make_atom_problem(*base, ej, xj);
    const NihtResult res = niht_atom_step(prob, a, l, 0.5);
    if (res.status != NihtStatus::Accepted || res.backtracks != 0) continue;
    ++checked;
    const Vector g = prob.gradient(a);
    const auto cost_at = [&](double eta) { return prob.cost(SparseVec::from_dense(Vector(a.to_dense() - eta * g))); };
    const double c = cost_at(res.step);
    const double slack = 1e-12 * std::max(1.0, std::abs(c));
    ok += c <= cost_at(0.9 * res.step) + slack && c <= cost_at(1.1 * res.step) + slack;
  }
  return {checked == 100 && ok == 100, fmt("%d/%d instances at least as good as 0.9x and 1.1x the step", ok, checked)};
}

// --- 9 -------------------------------------------------------------------

Outcome denoising_criterion() {
  const auto t0 = Clock::now();
  const Matrix clean = read_pgm(data_path("images/camera.pgm")).block(192, 192, 128, 128);
  const double sigma = 30.0 / 255.0;
  const Matrix noisy = add_noise(clean, sigma, 5);

  DenoiseConfig cfg;
  cfg.patch_side = 16;
  cfg.training.atom_sparsity = 20;
  cfg.training.code_sparsity = 8;
  cfg.training.epochs = 5;
  cfg.training.batch_size = 256;
  cfg.training.seed = 3;
  cfg.seed = 3;

  DenoiseConfig untrained = cfg;
  untrained.trainer = TrainerKind::None;
  DenoiseConfig odct = cfg;
  odct.base.kind = BaseKind::Odct;
  odct.base.odct_atoms = make_base(cfg.base, cfg.patch_side, 1)->atoms_1d();

  const double p_trained = psnr(clean, denoise(noisy, sigma, cfg).image, 1.0);
  const double p_untrained = psnr(clean, denoise(noisy, sigma, untrained).image, 1.0);
  const double p_odct = psnr(clean, denoise(noisy, sigma, odct).image, 1.0);
  const double secs = seconds_since(t0);
  const bool pass = p_trained - p_untrained >= 0.5 && p_trained - p_odct >= 0.1 && secs < 600.0;
  return {
      pass,
      fmt("noisy %.2f dB; trained cropped %.2f, untrained %.2f (+%.2f, want 0.5), ODCT %.2f (+%.2f, want 0.1), %.0fs",
          psnr(clean, noisy, 1.0), p_trained, p_untrained, p_trained - p_untrained, p_odct, p_trained - p_odct, secs)};
}

// --- 10 ------------------------------------------------------------------

Outcome complexity_criterion() {
  const auto base = cropped(16, 2);
  const Matrix pool = sample_patches(corpus(), 16, 2048, 10);
  TrainerConfig cfg;
  cfg.code_sparsity = 8;
  cfg.maintenance_period = 0;

  const auto update_time = [&](Index k) {
    cfg.atom_sparsity = k;
    const TrainerState start(SparseDictionary::identity_init(base, base->atom_count(), k, 1), 1);
    const Matrix y = pool.leftCols(512);
    const SparseCodeMatrix x = code_batch(start.dict, start.gram.g, y, cfg.code_sparsity);
    std::vector<double> runs;
    for (int rep = 0; rep < 5; ++rep) {
      TrainerState st = start;
      const auto t0 = Clock::now();
      osdl_update(st, y, x, cfg, 100.0);
      runs.push_back(seconds_since(t0));
    }
    return median(runs);
  };
  const auto coding_time = [&](Index n) {
    cfg.atom_sparsity = 10;
    const TrainerState st(SparseDictionary::identity_init(base, base->atom_count(), 10, 1), 1);
    const Matrix y = pool.leftCols(n);
    std::vector<double> runs;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = Clock::now();
      const auto x = code_batch(st.dict, st.gram.g, y, cfg.code_sparsity);
      runs.push_back(seconds_since(t0));
      if (x.examples() != n) return -1.0;
    }
    return median(runs);
  };
  const double u1 = update_time(10), u2 = update_time(20);
  const double c1 = coding_time(512), c2 = coding_time(1024);
  const double ru = u2 / u1, rc = c2 / c1;
  return {ru <= 2.5 && rc <= 2.5 && c1 > 0.0,
          fmt("update k 10->20: %.3fs -> %.3fs (x%.2f); coding N 512->1024: %.3fs -> %.3fs (x%.2f); limit x2.5", u1, u2,
              ru, c1, c2, rc)};
}

// --- 11 ------------------------------------------------------------------

Outcome determinism_criterion() {
  const fs::path dir = fs::temp_directory_path() / "trainlets_acceptance";
  fs::create_directories(dir);
  const std::string common = std::string(TRAINLETS_CLI) + " train --images " + data_path("images") +
                             " --patch 8 --k 6 --p 4 --patches 4000 --epochs 2 --batch 256 --seed 11 --out ";
  const fs::path a = dir / "run_a.trnl", b = dir / "run_b.trnl";
  fs::remove(a);
  fs::remove(b);
  const int ra = std::system((common + a.string() + " 2>/dev/null").c_str());
  const int rb = std::system((common + b.string() + " 2>/dev/null").c_str());
  if (ra != 0 || rb != 0) return {false, fmt("train exited with %d / %d", ra, rb)};
  const std::string ba = read_file_bytes(a), bb = read_file_bytes(b);
  return {ba == bb && !ba.empty(), fmt("two train runs, seed 11: %zu and %zu bytes, %s", ba.size(), bb.size(),
                                       ba == bb ? "identical" : "different")};
}

std::set<int> parse_ids(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.insert(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, known;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--only")
      only = parse_ids(argv[i + 1]);
    else if (flag == "--known-failures")
      known = parse_ids(argv[i + 1]);
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"border benchmark", border_benchmark_criterion},
      {"M-term ordering", mterm_ordering_criterion},
      {"redundancy constant", redundancy_criterion},
      {"batch monotonicity", batch_monotone_criterion},
      {"planted-dictionary recovery", planted_recovery_criterion},
      {"oracle equivalences", oracle_criterion},
      {"hard-threshold optimality", hard_threshold_criterion},
      {"NIHT step optimality", niht_step_criterion},
      {"denoising direction", denoising_criterion},
      {"complexity scaling", complexity_criterion},
      {"determinism", determinism_criterion},
  };

  int passed = 0, run = 0;
  std::vector<int> unexpected;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++run;
    passed += o.pass;
    if (!o.pass && !known.contains(id)) unexpected.push_back(id);
    std::printf("%s %2d %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(),
                !o.pass && known.contains(id) ? " [known failure]" : "");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria pass\n", passed, run);
  return unexpected.empty() ? 0 : 1;
}
