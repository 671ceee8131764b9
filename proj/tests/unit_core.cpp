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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <sndcr/checkpoint.hpp>
#include <sndcr/config.hpp>
#include <sndcr/rng.hpp>

using namespace sndcr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "sndcr_unit_core";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  fs::path p = temp_dir() / name;
  std::ofstream f(p);
  f << text;
  return p;
}

}  // namespace

TEST_CASE("empty config file yields all defaults") {
  fs::path p = write_file("empty.cfg", "# nothing but a comment\n\n");
  TrainConfig cfg = load_config(p.string());
  CHECK(cfg.lr == doctest::Approx(2e-4));
  CHECK(cfg.tau == doctest::Approx(0.07));
  CHECK(cfg.alpha_style == doctest::Approx(0.04));
  CHECK(cfg.lambda_semantic == doctest::Approx(1.0));
  CHECK(cfg.lambda_style == doctest::Approx(0.5));
  CHECK(cfg.epochs == 400);
  CHECK(cfg.decay_start_epoch == 200);
  CHECK(cfg.adam_beta1 == doctest::Approx(0.5));
  CHECK(cfg.adam_beta2 == doctest::Approx(0.999));
  CHECK(cfg.batch_size == 1);
  CHECK(cfg.load_size == 286);
  CHECK(cfg.crop_size == 256);
  CHECK(cfg.patches_per_layer == 256);
  CHECK(cfg.n_resblocks == 9);
  CHECK(cfg.buffer_capacity == 50);
  CHECK(cfg.gan_mode == GanMode::kLogistic);
}

TEST_CASE("single-key override keeps all other defaults") {
  fs::path p = write_file("tau.cfg", "tau=0.05\n");
  TrainConfig cfg = load_config(p.string());
  CHECK(cfg.tau == doctest::Approx(0.05));
  CHECK(cfg.lr == doctest::Approx(2e-4));
  CHECK(cfg.epochs == 400);
}

TEST_CASE("crop larger than load size is a validation error naming the field") {
  fs::path p = write_file("crop.cfg", "crop_size=300\nload_size=286\n");
  CHECK_THROWS_WITH_AS(load_config(p.string()),
                       doctest::Contains("crop_size"), ConfigError);
}

TEST_CASE("parse failures name the offending line") {
  fs::path p = write_file("bad.cfg", "lr=2e-4\nthis is not a pair\n");
  CHECK_THROWS_WITH_AS(load_config(p.string()), doctest::Contains(":2:"),
                       ConfigError);
  fs::path q = write_file("unknown.cfg", "not_a_key=3\n");
  CHECK_THROWS_WITH_AS(load_config(q.string()),
                       doctest::Contains("unknown key"), ConfigError);
  fs::path r = write_file("badint.cfg", "epochs=four\n");
  CHECK_THROWS_WITH_AS(load_config(r.string()), doctest::Contains("epochs"),
                       ConfigError);
}

TEST_CASE("decay epoch past the end is rejected") {
  fs::path p = write_file("decay.cfg", "epochs=100\ndecay_start_epoch=150\n");
  CHECK_THROWS_AS(load_config(p.string()), ConfigError);
}

TEST_CASE("zero dual weights are accepted for ablations") {
  fs::path p = write_file("ablate.cfg", "lambda_semantic=0\nlambda_style=0\n");
  TrainConfig cfg = load_config(p.string());
  CHECK(cfg.lambda_semantic == 0.0);
  CHECK(cfg.lambda_style == 0.0);
}

TEST_CASE("config round-trips through save and load") {
  TrainConfig cfg;
  cfg.tau = 0.031;
  cfg.gan_mode = GanMode::kLeastSquares;
  cfg.entropy_source = EntropySource::kInput;
  cfg.dataset = DatasetKind::kFolders;
  cfg.data_root = "/some/path with spaces";
  cfg.lr = 1.25e-4;
  cfg.flip = false;
  cfg.n_resblocks = 2;
  fs::path p = temp_dir() / "roundtrip.cfg";
  save_config_file(cfg, p.string());
  TrainConfig back = load_config(p.string());
  CHECK(back == cfg);
  // And a second round through text form.
  CHECK(parse_config(save_config(back), "mem") == cfg);
}

TEST_CASE("apply_override mutates a single key and rejects unknowns") {
  TrainConfig cfg;
  apply_override(cfg, "epochs=5");
  CHECK(cfg.epochs == 5);
  CHECK_THROWS_AS(apply_override(cfg, "nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "no_equals"), ConfigError);
}

TEST_CASE("tensor store round-trips every dtype bit-exactly") {
  TensorStore store;
  RandomStream rng(5);
  Tensor<float> tf(Shape{3, 4});
  for (int64_t i = 0; i < tf.numel(); ++i)
    tf[i] = static_cast<float>(rng.gaussian());
  Tensor<double> td(Shape{2, 2, 2});
  for (int64_t i = 0; i < td.numel(); ++i) td[i] = rng.gaussian();
  store.put("g.weight", tf);
  store.put("adam.m", td);
  store.put_i64("epoch", 42);
  store.put_bytes("rng", std::string("state\0with\0nulls", 16));

  fs::path p = temp_dir() / "store.ckpt";
  store.save(p.string());
  TensorStore back = TensorStore::load(p.string());

  Tensor<float> tf2 = back.get_f32("g.weight");
  REQUIRE(tf2.shape() == tf.shape());
  for (int64_t i = 0; i < tf.numel(); ++i) CHECK(tf2[i] == tf[i]);
  Tensor<double> td2 = back.get_f64("adam.m");
  for (int64_t i = 0; i < td.numel(); ++i) CHECK(td2[i] == td[i]);
  CHECK(back.get_i64("epoch") == 42);
  CHECK(back.get_bytes("rng") == std::string("state\0with\0nulls", 16));
}

TEST_CASE("tensor store errors carry the path and entry name") {
  CHECK_THROWS_WITH_AS(TensorStore::load("/nonexistent/file.ckpt"),
                       doctest::Contains("/nonexistent/file.ckpt"), IoError);

  fs::path p = write_file("garbage.ckpt", "not a checkpoint at all");
  CHECK_THROWS_AS(TensorStore::load(p.string()), IoError);

  TensorStore store;
  store.put_i64("epoch", 1);
  CHECK_THROWS_WITH_AS(store.get_f32("missing"), doctest::Contains("missing"),
                       IoError);
  CHECK_THROWS_AS(store.get_f32("epoch"), IoError);  // dtype mismatch
}

TEST_CASE("seed_all drives named substreams deterministically") {
  seed_all(7);
  RandomStream a = stream_for("patches");
  seed_all(7);
  RandomStream b = stream_for("patches");
  for (int i = 0; i < 20; ++i) CHECK(a.next_u64() == b.next_u64());

  seed_all(7);
  auto s7 = stream_for("patches").next_u64();
  seed_all(8);
  auto s8 = stream_for("patches").next_u64();
  CHECK(s7 != s8);

  // Zero is an ordinary seed, not a sentinel.
  seed_all(0);
  RandomStream z1 = stream_for("x");
  seed_all(0);
  RandomStream z2 = stream_for("x");
  CHECK(z1.next_u64() == z2.next_u64());
  seed_all(17);
}
