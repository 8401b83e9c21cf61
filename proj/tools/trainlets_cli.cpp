// Command-line front end: train, denoise, compress, approx, border-bench, dict-info.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "trainlets/config.hpp"
#include "trainlets/dict_file.hpp"
#include "trainlets/experiments.hpp"
#include "trainlets/image_io.hpp"
#include "trainlets/learning.hpp"

namespace fs = std::filesystem;
using namespace trainlets;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  ConfigMap flags;  // filled by CLI11 for every flag given on the command line
};

void add_keys(Command& cmd, std::initializer_list<const char*> keys) {
  cmd.app->add_option("--config", cmd.config_file, "flat key=value file; flags override it");
  for (const char* key : keys) {
    auto* opt = cmd.app->add_option_function<std::string>(std::string("--") + key,
                                                          [&cmd, key](const std::string& v) { cmd.flags[key] = v; });
    opt->type_name("VALUE");
  }
}

RunConfig resolve(const Command& cmd) {
  ConfigMap file;
  if (!cmd.config_file.empty()) file = parse_config_text(read_file_bytes(cmd.config_file));
  return build_run_config(file, cmd.flags);
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

Matrix crop(const Matrix& img, const RunConfig& cfg) {
  if (cfg.crop.empty()) return img;
  const Index r = cfg.crop[0], c = cfg.crop[1], h = cfg.crop[2], w = cfg.crop[3];
  detail::require(r + h <= img.rows() && c + w <= img.cols() && h > 0 && w > 0, ErrorCode::InvalidConfig,
                  "crop window leaves the image");
  return img.block(r, c, h, w);
}

std::vector<Matrix> load_images(const RunConfig& cfg) {
  detail::require(!cfg.images.empty(), ErrorCode::InvalidConfig, "--images is required");
  std::vector<fs::path> paths;
  if (fs::is_directory(cfg.images))
    paths = list_pgm_files(cfg.images);
  else
    paths.push_back(cfg.images);
  detail::require(!paths.empty(), ErrorCode::IoError, "no .pgm files in " + cfg.images);
  std::vector<Matrix> out;
  for (const auto& p : paths) out.push_back(crop(read_pgm(p), cfg));
  return out;
}

void require_out(const RunConfig& cfg) {
  detail::require(!cfg.out.empty(), ErrorCode::InvalidConfig, "--out is required");
}

SparseDictionary fresh_dictionary(const RunConfig& cfg, Index k) {
  const auto base = make_base(cfg.base_spec(), cfg.patch, 2);
  const Index m = cfg.atoms > 0 ? cfg.atoms : base->atom_count();
  return SparseDictionary::identity_init(base, m, k, cfg.training.seed);
}

int run_train(const RunConfig& cfg) {
  require_out(cfg);
  const auto images = load_images(cfg);
  const Matrix samples = sample_patches(images, cfg.patch, cfg.patches, cfg.training.seed);
  SparseDictionary a0 = fresh_dictionary(cfg, cfg.training.atom_sparsity);
  log_line("train: " + std::to_string(samples.cols()) + " patches of " + std::to_string(cfg.patch) + "x" +
           std::to_string(cfg.patch) + ", " + std::to_string(a0.atom_count()) + " atoms over " +
           std::to_string(a0.coeff_dim()) + " base coefficients");

  std::vector<CsvRow> progress;
  SparseDictionary trained = [&] {
    if (cfg.trainer == "osdl") {
      OsdlOptions opts;
      opts.progress = [&progress](const ProgressRow& r) {
        progress.push_back({static_cast<long long>(r.t), r.batch_mse});
      };
      return osdl_train(samples, std::move(a0), cfg.training, opts);
    }
    if (cfg.trainer == "batch") {
      auto res = batch_learn(samples, std::move(a0), cfg.training);
      for (std::size_t i = 0; i < res.cost_history.size(); ++i)
        progress.push_back({static_cast<long long>(i), res.cost_history[i]});
      return std::move(res.dict);
    }
    return a0;
  }();

  write_dictionary(cfg.out, trained);
  if (!cfg.progress.empty())
    write_csv(cfg.progress, {"step", cfg.trainer == "batch" ? "objective" : "batch_mse"}, progress);
  const EffectiveGram g = gram_full(trained);
  log_line("train: coding MSE on the training patches " +
           format_double(coding_mse(trained, g.g, samples, cfg.training.code_sparsity)));
  return 0;
}

int run_denoise(const RunConfig& cfg) {
  detail::require(!cfg.input.empty(), ErrorCode::InvalidConfig, "--input is required");
  detail::require(cfg.sigma > 0.0, ErrorCode::InvalidConfig, "--sigma must be positive (0..255 scale)");
  const Matrix img = crop(read_pgm(cfg.input), cfg);
  const double sigma = cfg.sigma / 255.0;
  const Matrix noisy = cfg.add_noise ? add_noise(img, sigma, cfg.training.seed) : img;

  DenoiseConfig dc;
  dc.patch_side = cfg.patch;
  dc.base = cfg.base_spec();
  dc.atoms = cfg.atoms;
  dc.trainer = cfg.trainer == "osdl"    ? TrainerKind::Osdl
               : cfg.trainer == "batch" ? TrainerKind::Batch
                                        : TrainerKind::None;
  dc.training = cfg.training;
  dc.gain = cfg.gain;
  dc.lambda_scale = cfg.lambda;
  dc.seed = cfg.training.seed;

  const DenoiseResult res =
      cfg.dict.empty() ? denoise(noisy, sigma, dc) : denoise_with(read_dictionary(cfg.dict), noisy, sigma, dc);
  if (!cfg.out.empty()) write_pgm(cfg.out, res.image);
  std::cout << "mean_atoms " << format_double(res.mean_atoms) << '\n';
  if (cfg.add_noise) {
    std::cout << "psnr_noisy " << format_double(psnr(img, noisy, 1.0)) << '\n';
    std::cout << "psnr_denoised " << format_double(psnr(img, res.image, 1.0)) << '\n';
  }
  return 0;
}

int run_compress(const RunConfig& cfg) {
  require_out(cfg);
  const auto images = load_images(cfg);
  const SparseDictionary sd = cfg.dict.empty() ? fresh_dictionary(cfg, 1) : read_dictionary(cfg.dict);
  const auto table = compress_eval(sd, images, cfg.budgets);
  std::vector<CsvRow> rows;
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t b = 0; b < cfg.budgets.size(); ++b)
      rows.push_back({static_cast<long long>(i), static_cast<long long>(cfg.budgets[b]), table[i][b]});
  write_csv(cfg.out, {"image", "budget", "psnr"}, rows);
  return 0;
}

int run_approx(const RunConfig& cfg) {
  require_out(cfg);
  const auto images = load_images(cfg);
  const Matrix patches = sample_patches(images, cfg.patch, cfg.patches, cfg.training.seed);
  const auto filter = wavelet_filters(cfg.family, cfg.order);

  BaseSpec spec = cfg.base_spec();
  spec.kind = BaseKind::CroppedWavelet;
  const auto cropped = make_base(spec, cfg.patch, 2);
  spec.kind = BaseKind::PeriodicWavelet;
  const auto periodic = make_base(spec, cfg.patch, 2);

  std::vector<MTermMethod> methods{omp_method("cropped_separable", cropped), omp_method("separable", periodic),
                                   dwt2d_method("dwt2d", filter, cfg.patch, cfg.levels)};
  if (!cfg.dict.empty())
    methods.push_back(omp_method("trained", std::make_shared<const SparseDictionary>(read_dictionary(cfg.dict))));

  const MTermResult res = mterm_curve(methods, patches, cfg.budgets);
  std::vector<CsvRow> rows;
  for (std::size_t m = 0; m < res.methods.size(); ++m)
    for (std::size_t c = 0; c < res.counts.size(); ++c)
      rows.push_back({res.methods[m], static_cast<long long>(res.counts[c]), res.mean_psnr[m][c]});
  write_csv(cfg.out, {"method", "terms", "mean_psnr"}, rows);
  return 0;
}

int run_border(const RunConfig& cfg) {
  require_out(cfg);
  const auto res =
      border_benchmark(cfg.n, cfg.count, cfg.training.seed, cfg.terms, wavelet_filters(cfg.family, cfg.order));
  std::vector<CsvRow> rows;
  for (Index i = 0; i < cfg.n; ++i) rows.push_back({static_cast<long long>(i), res.periodic[i], res.cropped[i]});
  write_csv(cfg.out, {"index", "periodic_mse", "cropped_mse"}, rows);
  log_line("border-bench: outer-sample error periodic " + format_double(border_mass(res.periodic)) + ", cropped " +
           format_double(border_mass(res.cropped)));
  return 0;
}

int run_dict_info(const RunConfig& cfg) {
  detail::require(!cfg.input.empty(), ErrorCode::InvalidConfig, "a dictionary file is required");
  const std::string bytes = read_file_bytes(cfg.input);
  const DictHeader h = parse_header(bytes);
  const SparseDictionary sd = deserialize_dictionary(bytes);
  std::size_t nnz = 0;
  for (const auto& c : sd.columns()) nnz += c.nnz();
  std::cout << "version " << kDictVersion << '\n'
            << "n_side " << h.n_side << '\n'
            << "base_atoms_1d " << h.atoms_1d << '\n'
            << "atoms " << h.atoms << '\n'
            << "atom_sparsity " << h.atom_sparsity << '\n'
            << "family " << h.family << '\n'
            << "order " << h.order << '\n'
            << "levels " << h.levels << '\n'
            << "flags " << h.flags << '\n'
            << "signal_dim " << sd.signal_dim() << '\n'
            << "nonzeros " << nnz << '\n'
            << "roundtrip " << (serialize_dictionary(sd) == bytes ? "identical" : "DIFFERS") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse dictionaries over cropped wavelet bases"};
  app.require_subcommand(1);

  Command train{app.add_subcommand("train", "learn a sparse dictionary from image patches")};
  add_keys(train, {"images",
                   "crop",
                   "out",
                   "progress",
                   "trainer",
                   "patch",
                   "patches",
                   "base",
                   "family",
                   "order",
                   "levels",
                   "atoms",
                   "k",
                   "p",
                   "batch",
                   "epochs",
                   "momentum",
                   "decay",
                   "backtrack",
                   "maintenance",
                   "prune",
                   "unused-threshold",
                   "batch-iterations",
                   "atom-iterations",
                   "seed"});
  Command den{app.add_subcommand("denoise", "single-pass patch denoising of one image")};
  add_keys(den, {"input",
                 "crop",
                 "dict",
                 "out",
                 "sigma",
                 "add-noise",
                 "gain",
                 "lambda",
                 "trainer",
                 "patch",
                 "base",
                 "family",
                 "order",
                 "levels",
                 "atoms",
                 "k",
                 "p",
                 "batch",
                 "epochs",
                 "momentum",
                 "decay",
                 "maintenance",
                 "prune",
                 "unused-threshold",
                 "batch-iterations",
                 "atom-iterations",
                 "seed"});
  Command comp{app.add_subcommand("compress", "whole-image sparse coding at coefficient budgets")};
  add_keys(comp,
           {"images", "crop", "dict", "out", "budgets", "patch", "base", "family", "order", "levels", "atoms", "seed"});
  Command approx{app.add_subcommand("approx", "M-term approximation of random patches")};
  add_keys(approx,
           {"images", "crop", "dict", "out", "budgets", "patch", "patches", "family", "order", "levels", "seed"});
  Command border{app.add_subcommand("border-bench", "border error of periodic vs cropped wavelets")};
  add_keys(border, {"n", "count", "terms", "family", "order", "out", "seed"});
  Command info{app.add_subcommand("dict-info", "print a dictionary file header")};
  add_keys(info, {});
  info.app->add_option_function<std::string>("file", [&info](const std::string& v) { info.flags["input"] = v; })
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const std::pair<Command*, int (*)(const RunConfig&)> table[] = {{&train, run_train},   {&den, run_denoise},
                                                                  {&comp, run_compress}, {&approx, run_approx},
                                                                  {&border, run_border}, {&info, run_dict_info}};
  for (const auto& [cmd, fn] : table) {
    if (!cmd->app->parsed()) continue;
    try {
      return fn(resolve(*cmd));
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      switch (e.code()) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::UnsupportedFamily:
        case ErrorCode::InvalidOrder:
        case ErrorCode::TooManyLevels:
        case ErrorCode::InvalidSigma:
          return kExitConfig;
        default:
          return kExitRuntime;
      }
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitConfig;
}
