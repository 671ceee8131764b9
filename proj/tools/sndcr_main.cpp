// Copyright (c) 2026 The sndcr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <sndcr/data.hpp>
#include <sndcr/metrics.hpp>
#include <sndcr/selfcheck.hpp>
#include <sndcr/trainer.hpp>

namespace fs = std::filesystem;
using namespace sndcr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSelfcheckFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

/// Seed precedence: --seed flag > config file > SNDCR_SEED env > built-in.
void apply_seed_sources(TrainConfig& cfg, std::optional<int64_t> flag_seed,
                        bool config_had_seed) {
  if (flag_seed) {
    cfg.seed = *flag_seed;
    return;
  }
  if (config_had_seed) return;
  if (const char* env = std::getenv("SNDCR_SEED")) cfg.seed = std::atoll(env);
}

bool config_file_sets_seed(const std::string& path) {
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key == "seed") return true;
  }
  return false;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir, std::optional<int64_t> seed,
              const std::string& resume, bool quiet) {
  std::unique_ptr<TrainSession> session;
  try {
    if (!resume.empty()) {
      session = TrainSession::resume(resume);
    } else {
      TrainConfig cfg = load_config(config_path);
      bool had_seed = config_file_sets_seed(config_path);
      for (const std::string& kv : overrides) {
        apply_override(cfg, kv);
        if (kv.rfind("seed=", 0) == 0) had_seed = true;
      }
      apply_seed_sources(cfg, seed, had_seed);
      cfg.validate();
      session = std::make_unique<TrainSession>(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    std::string final_ckpt = session->fit(out_dir, quiet ? nullptr : &std::cout);
    std::cout << "final checkpoint: " << final_ckpt << "\n";
    return kExitOk;
  } catch (const TrainingAbort& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_translate(const std::string& checkpoint, const std::string& input_dir,
                  const std::string& out_dir) {
  LoadedGenerator loaded;
  try {
    loaded = load_generator(checkpoint);
  } catch (const Error& e) {
    std::cerr << "cannot load checkpoint: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<std::string> files;
  try {
    files = list_image_files(input_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (files.empty()) {
    std::cerr << "warning: no images found in '" << input_dir << "'\n";
    return kExitOk;
  }
  fs::create_directories(out_dir);
  const int size = static_cast<int>(loaded.cfg.crop_size);
  for (const std::string& file : files) {
    ImageU8 img;
    try {
      img = load_image_u8(file);
    } catch (const IoError&) {
      std::cerr << "warning: skipping unreadable image '" << file << "'\n";
      continue;
    }
    // The generator's attention bases are fixed at its training size.
    Tensor<float> x = to_tensor(resize_bilinear(img, size, size));
    Tensor<float> y = loaded.gen->generate(Var<float>(x), false).value();
    fs::path out_path = fs::path(out_dir) / fs::path(file).filename();
    save_image_u8(from_tensor(y), out_path.string());
  }
  std::cout << "translated " << files.size() << " images to " << out_dir << "\n";
  return kExitOk;
}

std::vector<Tensor<float>> load_set(const std::string& dir, int size) {
  std::vector<Tensor<float>> images;
  for (const std::string& file : list_image_files(dir)) {
    try {
      images.push_back(to_tensor(resize_bilinear(load_image_u8(file), size, size)));
    } catch (const IoError&) {
      std::cerr << "warning: skipping unreadable image '" << file << "'\n";
    }
  }
  if (images.empty()) throw Error("no readable images in '" + dir + "'");
  return images;
}

int cmd_evaluate(const std::string& dir_a, const std::string& dir_b,
                 bool do_fid, bool do_swd, bool do_ssim, int size,
                 int64_t seed, const std::string& fid_weights,
                 const std::string& report_path, const std::string& csv_path) {
  try {
    seed_all(static_cast<uint64_t>(seed));
    std::vector<Tensor<float>> set_a = load_set(dir_a, size);
    std::vector<Tensor<float>> set_b = load_set(dir_b, size);

    std::map<std::string, double> metrics;
    std::string extractor_id = "none";
    if (do_fid) {
      FidExtractor extractor =
          fid_weights.empty()
              ? FidExtractor(static_cast<uint64_t>(seed))
              : FidExtractor(fid_weights);
      extractor_id = extractor.id();
      metrics["fid"] = fid(extractor.features(set_a), extractor.features(set_b));
    }
    if (do_swd) {
      SwdOptions opts;
      opts.seed = static_cast<uint64_t>(seed);
      metrics["swd"] = swd(set_a, set_b, opts);
    }
    if (do_ssim) {
      // SSIM needs pairwise alignment by filename.
      auto names_a = list_image_files(dir_a);
      auto names_b = list_image_files(dir_b);
      std::vector<std::string> base_a, base_b;
      for (const auto& f : names_a) base_a.push_back(fs::path(f).filename().string());
      for (const auto& f : names_b) base_b.push_back(fs::path(f).filename().string());
      if (base_a != base_b) {
        std::cerr << "error: --ssim requires sets aligned by filename\n";
        return kExitUsage;
      }
      double total = 0;
      for (size_t i = 0; i < set_a.size(); ++i)
        total += ssim(set_a[i], set_b[i]);
      metrics["ssim"] = total / static_cast<double>(set_a.size());
    }

    std::ostringstream report;
    report.precision(9);
    for (const auto& [name, value] : metrics)
      report << name << "=" << value << "\n";
    report << "extractor=" << extractor_id << "\n";
    report << "seed=" << seed << "\n";
    std::cout << report.str();
    if (!report_path.empty()) {
      std::ofstream f(report_path);
      f << report.str();
    }
    if (!csv_path.empty()) {
      std::ofstream f(csv_path);
      f << "metric,value,extractor,seed\n";
      f.precision(9);
      for (const auto& [name, value] : metrics)
        f << name << "," << value << "," << extractor_id << "," << seed << "\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_make_synthetic(const std::string& out_dir, int n_train, int n_test,
                       int size, int64_t seed) {
  try {
    uint64_t s = static_cast<uint64_t>(seed);
    make_synthetic({SyntheticKind::kCircles, n_train, size,
                    derive_seed(s, "synth.trainA")},
                   (fs::path(out_dir) / "trainA").string());
    make_synthetic({SyntheticKind::kSquares, n_train, size,
                    derive_seed(s, "synth.trainB")},
                   (fs::path(out_dir) / "trainB").string());
    make_synthetic({SyntheticKind::kCircles, n_test, size,
                    derive_seed(s, "synth.testA")},
                   (fs::path(out_dir) / "testA").string());
    make_synthetic({SyntheticKind::kSquares, n_test, size,
                    derive_seed(s, "synth.testB")},
                   (fs::path(out_dir) / "testB").string());
    std::cout << "wrote " << 2 * (n_train + n_test) << " images under "
              << out_dir << "\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_selfcheck(bool quick, const std::string& corrupt) {
  SelfCheckOptions opts;
  opts.quick = quick;
  opts.corrupt = corrupt;
  auto results = run_selfcheck(opts, std::cout);
  for (const auto& r : results)
    if (!r.passed) return kExitSelfcheckFail;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unpaired image-to-image translation trainer"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a translator from a config");
  std::string train_config, train_out = "runs/default", train_resume;
  std::vector<std::string> train_sets;
  std::optional<int64_t> train_seed;
  bool train_quiet = false;
  auto* cfg_opt = train->add_option("--config", train_config, "Config file (key=value)");
  train->add_option("--set", train_sets, "Override: key=value (repeatable)");
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--seed", train_seed, "Seed override");
  train->add_option("--resume", train_resume, "Checkpoint to resume from");
  train->add_flag("--quiet", train_quiet, "Suppress per-iteration log echo");

  // translate
  auto* translate = app.add_subcommand("translate", "Run images through a trained generator");
  std::string tr_ckpt, tr_in, tr_out;
  translate->add_option("--checkpoint", tr_ckpt, "Checkpoint file")->required();
  translate->add_option("--input", tr_in, "Input image directory")->required();
  translate->add_option("--out", tr_out, "Output directory")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Metrics between two image sets");
  std::string ev_a, ev_b, ev_report, ev_csv, ev_weights;
  bool ev_fid = false, ev_swd = false, ev_ssim = false;
  int ev_size = 64;
  int64_t ev_seed = 17;
  evaluate->add_option("--set-a", ev_a, "First image directory")->required();
  evaluate->add_option("--set-b", ev_b, "Second image directory")->required();
  evaluate->add_flag("--fid", ev_fid, "Frechet distance on deep features");
  evaluate->add_flag("--swd", ev_swd, "Sliced Wasserstein distance");
  evaluate->add_flag("--ssim", ev_ssim, "SSIM (sets aligned by filename)");
  evaluate->add_option("--size", ev_size, "Evaluation resolution (default 64)");
  evaluate->add_option("--seed", ev_seed, "Seed for extractor/projections");
  evaluate->add_option("--fid-weights", ev_weights,
                       "Extractor weights file (default: seeded random)");
  evaluate->add_option("--report", ev_report, "Write key=value report here");
  evaluate->add_option("--csv", ev_csv, "Write CSV report here");

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "Generate the two shape domains");
  std::string sy_out;
  int sy_train = 200, sy_test = 32, sy_size = 64;
  int64_t sy_seed = 17;
  synth->add_option("--out", sy_out, "Dataset root (trainA/trainB/testA/testB)")
      ->required();
  synth->add_option("--n-train", sy_train, "Images per training domain");
  synth->add_option("--n-test", sy_test, "Images per test domain");
  synth->add_option("--size", sy_size, "Image size in pixels");
  synth->add_option("--seed", sy_seed, "Seed");

  // selfcheck
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the fast invariant suite");
  bool sc_quick = false;
  std::string sc_corrupt;
  selfcheck->add_flag("--quick", sc_quick, "Subset suite");
  selfcheck->add_option("--corrupt", sc_corrupt,
                        "Test hook: deliberately corrupt one named check")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (train->parsed()) {
    if (train_resume.empty() && (!cfg_opt || train_config.empty())) {
      std::cerr << "config error: train requires --config (or --resume)\n";
      return kExitUsage;
    }
    if (!train_seed && std::getenv("SNDCR_SEED") == nullptr) train_seed.reset();
    return cmd_train(train_config, train_sets, train_out, train_seed,
                     train_resume, train_quiet);
  }
  if (translate->parsed()) return cmd_translate(tr_ckpt, tr_in, tr_out);
  if (evaluate->parsed())
    return cmd_evaluate(ev_a, ev_b, ev_fid, ev_swd, ev_ssim, ev_size, ev_seed,
                        ev_weights, ev_report, ev_csv);
  if (synth->parsed())
    return cmd_make_synthetic(sy_out, sy_train, sy_test, sy_size, sy_seed);
  if (selfcheck->parsed()) return cmd_selfcheck(sc_quick, sc_corrupt);
  return kExitUsage;
}
