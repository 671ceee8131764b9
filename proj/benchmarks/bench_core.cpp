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

#include <benchmark/benchmark.h>

#include <sndcr/qs_attn.hpp>
#include <sndcr/trainer.hpp>

using namespace sndcr;

namespace {

Tensor<float> random_image(int c, int h, int w, RandomStream& rng) {
  Tensor<float> t(Shape{1, c, h, w});
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(std::tanh(rng.gaussian(0.0, 0.5)));
  return t;
}

TrainConfig bench_config() {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.decay_start_epoch = 5;
  cfg.load_size = 64;
  cfg.crop_size = 64;
  cfg.synthetic_size = 64;
  cfg.synthetic_n_train = 16;
  cfg.n_resblocks = 2;
  cfg.flip = false;
  cfg.gan_mode = GanMode::kLeastSquares;
  return cfg;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  RandomStream rng(1);
  const int c = static_cast<int>(state.range(0));
  Var<float> x(random_image(c, 16, 16, rng));
  Tensor<float> wt(Shape{c, c, 3, 3});
  init_normal(wt, rng, 0.02);
  Var<float> w(wt, true);
  for (auto _ : state) {
    Var<float> y = conv2d(x, w, Var<float>(), ConvOpts{1, 1, PadMode::kReflect});
    benchmark::DoNotOptimize(y.value().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(64)->Arg(256);

static void BM_Conv2dBackward(benchmark::State& state) {
  RandomStream rng(2);
  const int c = static_cast<int>(state.range(0));
  Var<float> x(random_image(c, 16, 16, rng), true);
  Tensor<float> wt(Shape{c, c, 3, 3});
  init_normal(wt, rng, 0.02);
  Var<float> w(wt, true);
  for (auto _ : state) {
    x.zero_grad();
    w.zero_grad();
    Var<float> y = sum_all(conv2d(x, w, Var<float>(), ConvOpts{1, 1, PadMode::kReflect}));
    y.backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(64)->Arg(256);

static void BM_AttentionEntropy(benchmark::State& state) {
  RandomStream rng(3);
  const int hw = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  Tensor<float> f(Shape{hw, c});
  for (int64_t i = 0; i < f.numel(); ++i)
    f[i] = static_cast<float>(rng.gaussian());
  for (auto _ : state) {
    Tensor<float> h = attention_entropy(f);
    benchmark::DoNotOptimize(h.data());
  }
}
BENCHMARK(BM_AttentionEntropy)->Args({1024, 128})->Args({4096, 3});

static void BM_GeneratorForward(benchmark::State& state) {
  RandomStream rng(4);
  GeneratorConfig gc;
  gc.n_resblocks = 2;
  gc.input_size = 64;
  ResnetGenerator<float> gen(gc, rng);
  Var<float> x(random_image(3, 64, 64, rng));
  for (auto _ : state) {
    Var<float> y = gen.generate(x, false);
    benchmark::DoNotOptimize(y.value().data());
  }
}
BENCHMARK(BM_GeneratorForward);

static void BM_VggExtract(benchmark::State& state) {
  RandomStream rng(5);
  VggExtractor<float> vgg(7);
  Var<float> x(random_image(3, 64, 64, rng));
  for (auto _ : state) {
    VggTaps<float> taps = vgg.extract(x);
    benchmark::DoNotOptimize(taps.taps.at(13).value().data());
  }
}
BENCHMARK(BM_VggExtract);

static void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg = bench_config();
  cfg.base_channels = state.range(0);
  cfg.disc_channels = state.range(0);
  TrainSession session(cfg);
  auto [x, y] = session.dataset().next_batch(1);
  for (auto _ : state) {
    LossReport<float> r = session.train_step(x, y);
    benchmark::DoNotOptimize(r.total);
  }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
