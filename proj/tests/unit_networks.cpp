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

#include <sndcr/discriminator.hpp>
#include <sndcr/generator.hpp>

using namespace sndcr;

namespace {

template <typename T>
Tensor<T> random_image(int b, int c, int h, int w, RandomStream& rng,
                       double scale = 0.5) {
  Tensor<T> t(Shape{b, c, h, w});
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<T>(std::tanh(rng.gaussian(0.0, scale)));
  return t;
}

GeneratorConfig small_gen_cfg(int input_size, int n_res = 2, int base = 16) {
  GeneratorConfig cfg;
  cfg.base_channels = base;
  cfg.n_resblocks = n_res;
  cfg.input_size = input_size;
  return cfg;
}

}  // namespace

TEST_CASE("generator preserves shape and the tanh range") {
  RandomStream rng(1);
  ResnetGenerator<double> gen(small_gen_cfg(64), rng);
  Var<double> x(random_image<double>(1, 3, 64, 64, rng));
  Var<double> y = gen.generate(x);
  CHECK(y.shape() == Shape{1, 3, 64, 64});
  for (int64_t i = 0; i < y.value().numel(); ++i) {
    CHECK(y.value()[i] <= 1.0);
    CHECK(y.value()[i] >= -1.0);
  }
}

TEST_CASE("generator stride schedule: 256 input gives a 256x64x64 bottleneck") {
  RandomStream rng(2);
  GeneratorConfig cfg;  // paper-scale: base 64, 9 blocks
  cfg.input_size = 256;
  ResnetGenerator<float> gen(cfg, rng);
  Var<float> x(random_image<float>(1, 3, 256, 256, rng));
  auto r = gen.forward(x, false, false);
  CHECK(r.bottleneck.shape() == Shape{1, 256, 64, 64});
  CHECK(r.output.shape() == Shape{1, 3, 256, 256});
}

TEST_CASE("generator rejects spatial dims not divisible by 4") {
  RandomStream rng(3);
  ResnetGenerator<double> gen(small_gen_cfg(64), rng);
  Var<double> bad(random_image<double>(1, 3, 62, 62, rng));
  CHECK_THROWS_AS(gen.generate(bad), ShapeError);
}

TEST_CASE("two eval forwards with identical params and input are bit-identical") {
  RandomStream rng(4);
  ResnetGenerator<double> gen(small_gen_cfg(32), rng);
  Var<double> x(random_image<double>(1, 3, 32, 32, rng));
  Var<double> y1 = gen.generate(x);
  Var<double> y2 = gen.generate(x);
  for (int64_t i = 0; i < y1.value().numel(); ++i)
    CHECK(y1.value()[i] == y2.value()[i]);
}

TEST_CASE("taps follow the stride schedule and tap 0 is the input") {
  RandomStream rng(5);
  GeneratorConfig cfg = small_gen_cfg(64, /*n_res=*/6, /*base=*/64);
  ResnetGenerator<double> gen(cfg, rng);
  Var<double> x(random_image<double>(1, 3, 64, 64, rng));
  auto r = gen.forward(x, false, true);
  REQUIRE(r.taps.taps.size() == 5);
  CHECK(r.taps.taps[0].shape() == Shape{1, 3, 64, 64});
  CHECK(r.taps.taps[1].shape() == Shape{1, 128, 32, 32});
  CHECK(r.taps.taps[2].shape() == Shape{1, 256, 16, 16});
  CHECK(r.taps.taps[3].shape() == Shape{1, 256, 16, 16});
  CHECK(r.taps.taps[4].shape() == Shape{1, 256, 16, 16});
  for (int64_t i = 0; i < x.value().numel(); ++i)
    CHECK(r.taps.taps[0].value()[i] == x.value()[i]);
  // Tap blocks are the first and fifth residual blocks when available.
  CHECK(gen.tap_block_a() == 1);
  CHECK(gen.tap_block_b() == 5);
}

TEST_CASE("with two resblocks the deep tap falls back to the last block") {
  RandomStream rng(6);
  ResnetGenerator<double> gen(small_gen_cfg(32, 2), rng);
  CHECK(gen.tap_block_b() == 2);
  Var<double> x(random_image<double>(1, 3, 32, 32, rng));
  CHECK(gen.forward(x, false, true).taps.taps.size() == 5);
}

TEST_CASE("encoder taps of G(x) differ from encoder taps of x") {
  RandomStream rng(7);
  ResnetGenerator<double> gen(small_gen_cfg(32), rng);
  Var<double> x(random_image<double>(1, 3, 32, 32, rng));
  auto r = gen.forward(x, false, true);
  auto taps_gx = gen.encode_taps(r.output.detached(), false);
  bool some_differ = false;
  for (size_t l = 1; l < 5; ++l) {
    const auto& a = r.taps.taps[l].value();
    const auto& b = taps_gx.taps[l].value();
    for (int64_t i = 0; i < a.numel(); ++i)
      if (a[i] != b[i]) {
        some_differ = true;
        break;
      }
  }
  CHECK(some_differ);
}

TEST_CASE("every generator parameter receives gradient from a generic loss") {
  RandomStream rng(8);
  ResnetGenerator<double> gen(small_gen_cfg(16, 2, 16), rng);
  ParamRefs<double> params;
  gen.collect(params);
  zero_grads(params);
  Var<double> x(random_image<double>(1, 3, 16, 16, rng));
  Var<double> probe(random_image<double>(1, 3, 16, 16, rng, 1.0));
  Var<double> loss = sum_all(mul(gen.forward(x, true, false).output, probe));
  loss.backward();
  for (auto* p : params) {
    REQUIRE(p->var.has_grad());
    double norm = 0;
    for (int64_t i = 0; i < p->var.grad().numel(); ++i)
      norm += std::abs(p->var.grad()[i]);
    INFO("parameter ", p->name);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("discriminator output grids follow the conv arithmetic") {
  RandomStream rng(9);
  PatchDiscriminator<float> d(64, rng);
  Var<float> x256(random_image<float>(1, 3, 256, 256, rng));
  CHECK(d.forward(x256).shape() == Shape{1, 1, 30, 30});
  Var<float> x64(random_image<float>(1, 3, 64, 64, rng));
  CHECK(d.forward(x64).shape() == Shape{1, 1, 6, 6});

  // Closed-form C4 stack arithmetic oracle for a few sizes.
  auto conv_out = [](int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; };
  for (int n : {64, 128, 192, 256}) {
    int h = n;
    h = conv_out(h, 4, 2, 1);
    h = conv_out(h, 4, 2, 1);
    h = conv_out(h, 4, 2, 1);
    h = conv_out(h, 4, 1, 1);
    h = conv_out(h, 4, 1, 1);
    Var<float> x(random_image<float>(1, 3, n, n, rng));
    CHECK(d.forward(x).shape() == Shape{1, 1, h, h});
  }
}

TEST_CASE("discriminator rejects inputs that collapse spatially") {
  RandomStream rng(10);
  PatchDiscriminator<double> d(64, rng);
  Var<double> tiny(random_image<double>(1, 3, 32, 32, rng));
  CHECK_THROWS_AS(d.forward(tiny), ShapeError);
}

TEST_CASE("zero weights make every logit the final bias") {
  RandomStream rng(11);
  PatchDiscriminator<double> d(64, rng);
  ParamRefs<double> params;
  d.collect(params);
  for (auto* p : params) p->var.mutable_value().fill(0.0);
  // Re-set the final conv bias.
  for (auto* p : params)
    if (p->name == "D.conv4.bias") p->var.mutable_value().fill(0.37);
  Var<double> x(random_image<double>(1, 3, 64, 64, rng));
  Var<double> y = d.forward(x);
  for (int64_t i = 0; i < y.value().numel(); ++i)
    CHECK(y.value()[i] == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("each patch logit sees exactly a 70x70 input region") {
  // InstanceNorm couples every position through the spatial statistics, so
  // the footprint is measured on the norm-free stack (same convs).
  RandomStream rng(12);
  PatchDiscriminator<double> d(32, rng, /*use_norm=*/false);
  Var<double> x(random_image<double>(1, 3, 128, 128, rng), true);
  Var<double> logits = d.forward(x);
  REQUIRE(logits.shape() == Shape{1, 1, 14, 14});
  const int li = 7, lj = 7;  // interior logit
  Var<double> picked = gather_rows(reshape(logits, Shape{14 * 14, 1}),
                                   {li * 14 + lj});
  sum_all(picked).backward();
  int hmin = 1 << 30, hmax = -1, wmin = 1 << 30, wmax = -1;
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < 128; ++h)
      for (int w = 0; w < 128; ++w)
        if (x.grad().at4(0, c, h, w) != 0.0) {
          hmin = std::min(hmin, h);
          hmax = std::max(hmax, h);
          wmin = std::min(wmin, w);
          wmax = std::max(wmax, w);
        }
  CHECK(hmax - hmin + 1 == 70);
  CHECK(wmax - wmin + 1 == 70);
}

TEST_CASE("image buffer: fill phase returns inputs and pool grows to capacity") {
  RandomStream rng(13);
  ImageBuffer<float> buf(50, RandomStream(derive_seed(99, "buffer")));
  for (int i = 0; i < 50; ++i) {
    Tensor<float> img(Shape{1, 1, 2, 2}, static_cast<float>(i));
    Tensor<float> out = buf.query(img);
    CHECK(out[0] == static_cast<float>(i));
    CHECK(buf.size() == i + 1);
  }
  Tensor<float> extra(Shape{1, 1, 2, 2}, 123.0f);
  buf.query(extra);
  CHECK(buf.size() == 50);
}

TEST_CASE("image buffer: post-fill swap frequency is 0.5 within 0.02") {
  ImageBuffer<float> buf(50, RandomStream(derive_seed(7, "buffer")));
  Tensor<float> img(Shape{1, 1, 2, 2});
  for (int i = 0; i < 50; ++i) buf.query(img);
  const int queries = 10000;
  int64_t before = buf.swaps();
  for (int i = 0; i < queries; ++i) {
    img.fill(static_cast<float>(i));
    buf.query(img);
    CHECK(buf.size() == 50);
  }
  double freq = static_cast<double>(buf.swaps() - before) / queries;
  CHECK(freq > 0.48);
  CHECK(freq < 0.52);
}

TEST_CASE("image buffer returns batches of the query size") {
  ImageBuffer<float> buf(4, RandomStream(1));
  RandomStream rng(14);
  Tensor<float> batch = random_image<float>(3, 1, 2, 2, rng);
  Tensor<float> out = buf.query(batch);
  CHECK(out.shape() == batch.shape());
  CHECK(buf.size() == 3);
}
