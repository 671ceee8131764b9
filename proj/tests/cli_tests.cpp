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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef SNDCR_CLI_PATH
#error "SNDCR_CLI_PATH must point at the built tool"
#endif

namespace fs = std::filesystem;

namespace {

const fs::path kCli = SNDCR_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string stdout_text;
};

RunResult run(const std::string& args) {
  fs::path out = fs::temp_directory_path() / "sndcr_cli_stdout.txt";
  std::string cmd = kCli.string() + " " + args + " > " + out.string() + " 2>&1";
  int raw = std::system(cmd.c_str());
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WEXITSTATUS(raw), ss.str()};
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "sndcr_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

fs::path write_toy_config() {
  fs::path p = work_dir() / "toy.cfg";
  std::ofstream f(p);
  f << "epochs=1\nload_size=64\ncrop_size=64\nsynthetic_size=64\n"
       "synthetic_n_train=3\nn_resblocks=2\nbase_channels=16\n"
       "disc_channels=16\npatches_per_layer=16\ndecay_start_epoch=1\n"
       "gan_mode=least_squares\nflip=false\n";
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("make-synthetic writes the dataset layout deterministically") {
  fs::path ds = work_dir() / "ds";
  RunResult r = run("make-synthetic --out " + ds.string() +
                    " --n-train 4 --n-test 2 --size 64 --seed 3");
  CHECK(r.exit_code == 0);
  for (const char* sub : {"trainA", "trainB", "testA", "testB"})
    CHECK(fs::is_directory(ds / sub));
  CHECK(fs::exists(ds / "trainA" / "img_00000.png"));

  // Regeneration is bit-identical.
  fs::path ds2 = work_dir() / "ds2";
  run("make-synthetic --out " + ds2.string() +
      " --n-train 4 --n-test 2 --size 64 --seed 3");
  CHECK(slurp(ds / "trainA" / "img_00002.png") ==
        slurp(ds2 / "trainA" / "img_00002.png"));
}

TEST_CASE("train runs one epoch, writes artifacts, exits 0") {
  fs::path cfg = write_toy_config();
  fs::path out = work_dir() / "run1";
  RunResult r = run("train --config " + cfg.string() + " --out " + out.string() +
                    " --seed 5 --quiet");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "checkpoint_epoch00001.ckpt"));
  CHECK(fs::exists(out / "loss_log.txt"));
}

TEST_CASE("train exit codes: missing config and invalid override are usage errors") {
  CHECK(run("train --config /no/such.cfg --out /tmp/x").exit_code == 2);
  fs::path cfg = write_toy_config();
  CHECK(run("train --config " + cfg.string() +
            " --set crop_size=300 --set load_size=286 --out /tmp/x")
            .exit_code == 2);
  CHECK(run("train --out /tmp/x").exit_code == 2);
}

TEST_CASE("translate maps every input file to a matching output name") {
  fs::path ds = work_dir() / "ds";
  fs::path ckpt = work_dir() / "run1" / "checkpoint_epoch00001.ckpt";
  REQUIRE(fs::exists(ckpt));
  fs::path out = work_dir() / "translated";
  RunResult r = run("translate --checkpoint " + ckpt.string() + " --input " +
                    (ds / "testA").string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  int produced = 0;
  for (const auto& e : fs::directory_iterator(ds / "testA")) {
    CHECK(fs::exists(out / e.path().filename()));
    ++produced;
  }
  CHECK(produced == 2);

  // Frozen inference: a second run is bit-identical.
  fs::path out2 = work_dir() / "translated2";
  run("translate --checkpoint " + ckpt.string() + " --input " +
      (ds / "testA").string() + " --out " + out2.string());
  CHECK(slurp(out / "img_00000.png") == slurp(out2 / "img_00000.png"));
}

TEST_CASE("translate edge cases: empty input warns, missing checkpoint fails") {
  fs::path empty = work_dir() / "empty";
  fs::create_directories(empty);
  fs::path ckpt = work_dir() / "run1" / "checkpoint_epoch00001.ckpt";
  RunResult r = run("translate --checkpoint " + ckpt.string() + " --input " +
                    empty.string() + " --out " + (work_dir() / "x").string());
  CHECK(r.exit_code == 0);
  CHECK(r.stdout_text.find("warning") != std::string::npos);
  CHECK(run("translate --checkpoint /no/ckpt --input " + empty.string() +
            " --out /tmp/x").exit_code == 2);
}

TEST_CASE("evaluate: identical sets score trivially, reruns are identical") {
  fs::path ds = work_dir() / "ds";
  RunResult r = run("evaluate --set-a " + (ds / "testA").string() + " --set-b " +
                    (ds / "testA").string() + " --fid --swd --ssim --seed 11");
  CHECK(r.exit_code == 0);
  CHECK(r.stdout_text.find("ssim=1") != std::string::npos);
  CHECK(r.stdout_text.find("swd=0") != std::string::npos);
  CHECK(r.stdout_text.find("extractor=vgg16-seeded-random") != std::string::npos);

  RunResult r2 = run("evaluate --set-a " + (ds / "testA").string() + " --set-b " +
                     (ds / "testA").string() + " --fid --swd --ssim --seed 11");
  CHECK(r.stdout_text == r2.stdout_text);

  // Disjoint domains are separated.
  RunResult rd = run("evaluate --set-a " + (ds / "testA").string() + " --set-b " +
                     (ds / "testB").string() + " --fid --seed 11");
  double v = std::stod(rd.stdout_text.substr(rd.stdout_text.find("fid=") + 4));
  CHECK(v > 1e-4);
}

TEST_CASE("evaluate: ssim demands filename-aligned sets") {
  fs::path ds = work_dir() / "ds";
  fs::path odd = work_dir() / "odd";
  fs::create_directories(odd);
  fs::copy_file(ds / "testA" / "img_00000.png", odd / "other_name.png",
                fs::copy_options::overwrite_existing);
  CHECK(run("evaluate --set-a " + (ds / "testA").string() + " --set-b " +
            odd.string() + " --ssim").exit_code == 2);
}

TEST_CASE("selfcheck passes clean and fails when a check is corrupted") {
  RunResult ok = run("selfcheck --quick");
  CHECK(ok.exit_code == 0);
  CHECK(ok.stdout_text.find("all checks passed") != std::string::npos);

  RunResult bad = run("selfcheck --quick --corrupt gram");
  CHECK(bad.exit_code == 1);
  CHECK(bad.stdout_text.find("FAIL  gram_oracle") != std::string::npos);
}

TEST_CASE("training from image folders works end to end") {
  fs::path ds = work_dir() / "ds";  // written by the make-synthetic test
  REQUIRE(fs::is_directory(ds / "trainA"));
  fs::path cfg = work_dir() / "folders.cfg";
  {
    std::ofstream f(cfg);
    f << "epochs=1\nload_size=64\ncrop_size=64\ndataset=folders\n"
      << "data_root=" << ds.string() << "\n"
      << "n_resblocks=2\nbase_channels=16\ndisc_channels=16\n"
         "patches_per_layer=16\ndecay_start_epoch=1\n"
         "gan_mode=least_squares\nflip=false\n";
  }
  fs::path out = work_dir() / "run_folders";
  RunResult r = run("train --config " + cfg.string() + " --out " + out.string() +
                    " --seed 7 --quiet");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "checkpoint_epoch00001.ckpt"));
  // Epoch length is max(|trainA|, |trainB|) = 4.
  std::ifstream log(out / "loss_log.txt");
  int lines = 0;
  std::string line;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 4);
}

TEST_CASE("SNDCR_SEED acts as the default-seed override") {
  fs::path cfg = write_toy_config();
  fs::path out_a = work_dir() / "env_a";
  fs::path out_b = work_dir() / "env_b";
  std::string base = kCli.string() + " train --config " + cfg.string() +
                     " --quiet --out ";
  CHECK(WEXITSTATUS(std::system(
            ("SNDCR_SEED=21 " + base + out_a.string() + " > /dev/null 2>&1").c_str())) == 0);
  CHECK(WEXITSTATUS(std::system(
            ("SNDCR_SEED=21 " + base + out_b.string() + " > /dev/null 2>&1").c_str())) == 0);
  CHECK(slurp(out_a / "loss_log.txt") == slurp(out_b / "loss_log.txt"));

  // An explicit --seed wins over the environment.
  fs::path out_c = work_dir() / "env_c";
  CHECK(WEXITSTATUS(std::system(
            ("SNDCR_SEED=21 " + base + out_c.string() +
             " --seed 22 > /dev/null 2>&1").c_str())) == 0);
  CHECK(slurp(out_a / "loss_log.txt") != slurp(out_c / "loss_log.txt"));
}
