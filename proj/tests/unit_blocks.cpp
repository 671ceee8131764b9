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

#include <Eigen/SVD>

#include <sndcr/blocks.hpp>
#include <sndcr/gradcheck.hpp>

using namespace sndcr;

namespace {

Tensor<double> random_tensor(Shape shape, RandomStream& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.gaussian(0.0, scale);
  return t;
}

double svd_sigma_max(const Tensor<double>& w) {
  Eigen::MatrixXd m(w.dim(0), w.dim(1));
  for (int i = 0; i < w.dim(0); ++i)
    for (int j = 0; j < w.dim(1); ++j) m(i, j) = w.at2(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

SpectralNormState<double> unit_state(int rows, RandomStream& rng, int iters) {
  SpectralNormState<double> s;
  Tensor<double> u(Shape{rows});
  double n = 0;
  for (int i = 0; i < rows; ++i) {
    u[i] = rng.gaussian();
    n += u[i] * u[i];
  }
  n = std::sqrt(n);
  for (int i = 0; i < rows; ++i) u[i] /= n;
  s.u = std::move(u);
  s.n_power_iterations = iters;
  return s;
}

}  // namespace

TEST_CASE("spectral_normalize: identity has sigma 1") {
  Tensor<double> w(Shape{3, 3});
  w.at2(0, 0) = w.at2(1, 1) = w.at2(2, 2) = 1.0;
  RandomStream rng(1);
  auto [what, state] = spectral_normalize(w, unit_state(3, rng, 1));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(what.at2(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("spectral_normalize: diag(2,1) converges to sigma 2") {
  Tensor<double> w(Shape{2, 2});
  w.at2(0, 0) = 2.0;
  w.at2(1, 1) = 1.0;
  RandomStream rng(2);
  auto [what, state] = spectral_normalize(w, unit_state(2, rng, 60));
  CHECK(what.at2(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(what.at2(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
  // sigma estimate itself: W / W_hat on the top-left entry.
  CHECK(w.at2(0, 0) / what.at2(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("spectral_normalize: 50 iterations match the SVD oracle on 8x8") {
  RandomStream rng(3);
  Tensor<double> w = random_tensor({8, 8}, rng);
  auto [what, state] = spectral_normalize(w, unit_state(8, rng, 50));
  double sigma_est = w[0] / what[0];
  double sigma_svd = svd_sigma_max(w);
  CHECK(std::abs(sigma_est - sigma_svd) / sigma_svd < 1e-3);
}

TEST_CASE("spectral_normalize rejects the zero matrix and carries a unit u") {
  Tensor<double> z(Shape{4, 4});
  RandomStream rng(4);
  CHECK_THROWS_AS(spectral_normalize(z, unit_state(4, rng, 1)), Error);

  Tensor<double> w = random_tensor({6, 10}, rng);
  auto [what, state] = spectral_normalize(w, unit_state(6, rng, 5));
  double n = 0;
  for (int i = 0; i < 6; ++i) n += state.u[i] * state.u[i];
  CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-6);
}

TEST_CASE("20 power iterations keep sigma(W_hat) in the loose band on gaussian"
          " weights") {
  RandomStream rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> w = random_tensor({64, 576}, rng, 0.02);
    auto [what, state] = spectral_normalize(w, unit_state(64, rng, 20));
    double s = svd_sigma_max(what);
    CHECK(s >= 0.9);
    CHECK(s <= 1.1);
  }
}

TEST_CASE("power iteration error is monotone non-increasing on SPD matrices") {
  RandomStream rng(6);
  for (int trial = 0; trial < 3; ++trial) {
    const int n = 12;
    Tensor<double> b = random_tensor({n, n}, rng);
    Tensor<double> a(Shape{n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += b.at2(k, i) * b.at2(k, j);
        a.at2(i, j) = s + (i == j ? 0.1 : 0.0);
      }
    double sigma = svd_sigma_max(a);
    SpectralNormState<double> s0 = unit_state(n, rng, 1);
    double prev_err = -1.0;
    for (int k = 1; k <= 15; ++k) {
      SpectralNormState<double> sk = s0;
      sk.n_power_iterations = k;
      auto [what, state] = spectral_normalize(a, sk);
      double est = a[0] != 0.0 ? a[0] / what[0] : 0.0;
      double err = std::abs(est - sigma);
      if (prev_err >= 0.0) CHECK(err <= prev_err + 1e-12);
      prev_err = err;
    }
  }
}

TEST_CASE("SnConv2d with semi-orthogonal init normalizes exactly") {
  RandomStream rng(7);
  SnConv2d<double> conv("t.conv", 8, 16, 3, ConvOpts{1, 1, PadMode::kReflect},
                        rng);
  for (int step = 0; step < 20; ++step)
    (void)conv.normalized_weight(/*training=*/true);
  Var<double> what = conv.normalized_weight(/*training=*/false);
  Tensor<double> flat = what.value().reshaped(Shape{16, 8 * 9});
  double s = svd_sigma_max(flat);
  CHECK(s >= 0.99);
  CHECK(s <= 1.01);
}

TEST_CASE("sn_resblock: zero residual-path output weights give identity") {
  RandomStream rng(8);
  SnResBlock<double> block("t.res", 4, rng);
  // The closing InstanceNorm's affine weights belong to the residual path;
  // zeroing them makes f(x) vanish without dividing a zero kernel by its
  // (undefined) spectral norm.
  block.norm2.gamma.var.mutable_value().fill(0.0);
  block.norm2.beta.var.mutable_value().fill(0.0);
  Var<double> x(random_tensor({1, 4, 6, 6}, rng));
  Var<double> y = block.forward(x, /*training=*/false);
  for (int64_t i = 0; i < x.value().numel(); ++i)
    CHECK(y.value()[i] == x.value()[i]);
}

TEST_CASE("sn_resblock preserves shape and rejects channel mismatch") {
  RandomStream rng(9);
  SnResBlock<double> block("t.res", 8, rng);
  Var<double> x(random_tensor({1, 8, 12, 12}, rng));
  CHECK(block.forward(x, false).shape() == Shape{1, 8, 12, 12});
  Var<double> bad(random_tensor({1, 4, 12, 12}, rng));
  CHECK_THROWS_AS(block.forward(bad, false), ShapeError);
}

TEST_CASE("sn_resblock finite-difference gradient check in eval mode") {
  RandomStream rng(10);
  SnResBlock<double> block("t.res", 3, rng);
  Var<double> x(random_tensor({1, 3, 5, 5}, rng, 0.5));
  Var<double> probe(random_tensor({1, 3, 5, 5}, rng));
  auto f = [&] { return sum_all(mul(block.forward(x, false), probe)); };
  std::vector<Var<double>> inputs = {x, block.conv1.weight.var,
                                     block.conv2.weight.var,
                                     block.norm1.gamma.var,
                                     block.conv1.bias.var};
  CHECK(gradcheck(f, inputs, 1e-5) < 1e-3);
}

TEST_CASE("zigzag enumeration walks the standard order") {
  auto z = zigzag_frequencies(8, 8, 10);
  std::vector<std::pair<int, int>> expect = {
      {0, 0}, {0, 1}, {1, 0}, {2, 0}, {1, 1},
      {0, 2}, {0, 3}, {1, 2}, {2, 1}, {3, 0}};
  CHECK(z == expect);
  // A 4x4 grid has exactly 16 entries.
  CHECK(zigzag_frequencies(4, 4, 16).size() == 16);
  CHECK_THROWS_AS(zigzag_frequencies(2, 2, 16), Error);
}

TEST_CASE("dct basis (1,0) reproduces the brute-force double sum on impulses") {
  const int h = 4, w = 4;
  auto bases = make_dct_bases<double>(1, h, w, {{1, 0}});
  RandomStream rng(11);
  for (int h0 = 0; h0 < h; ++h0)
    for (int w0 = 0; w0 < w; ++w0) {
      Var<double> x(Tensor<double>(Shape{1, 1, h, w}));
      x.mutable_value().at4(0, 0, h0, w0) = 1.0;
      double pooled = basis_pool(x, bases).value().at2(0, 0);
      // Oracle: sum over (i, j) of x_ij cos(pi (2i+1) * 1 / (2H)) * B0(j),
      // with B0 the constant v=0 factor.
      double expect = std::cos(3.14159265358979323846 * (2 * h0 + 1) / (2.0 * h));
      CHECK(pooled == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("all-DC FCA equals squeeze-excitation with sum pooling") {
  RandomStream rng(12);
  const int c = 8, h = 5, w = 3;
  FcaConfig cfg;
  cfg.channel_groups = 4;
  cfg.reduction_ratio = 2;
  cfg.dct_frequencies = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};
  FcaLayer<double> fca("t.fca", c, h, w, cfg, rng);
  Var<double> x(random_tensor({2, c, h, w}, rng));
  Var<double> y = fca.forward(x);

  // SE oracle with the same MLP weights: gate = sigmoid(W2 relu(W1 z + b1)
  // + b2) on z = H*W * spatial mean (the DC basis is all ones).
  for (int b = 0; b < 2; ++b) {
    Tensor<double> z(Shape{1, c});
    for (int ci = 0; ci < c; ++ci) {
      double s = 0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) s += x.value().at4(b, ci, i, j);
      z.at2(0, ci) = s;  // == h*w times the average
    }
    Var<double> gate = sigmoid(fca.fc2.forward(relu(fca.fc1.forward(Var<double>(z)))));
    for (int ci = 0; ci < c; ++ci)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          CHECK(y.value().at4(b, ci, i, j) ==
                doctest::Approx(x.value().at4(b, ci, i, j) * gate.value().at2(0, ci))
                    .epsilon(1e-12));
  }
}

TEST_CASE("FCA gates stay strictly inside (0, 1)") {
  RandomStream rng(13);
  const int c = 16, h = 4, w = 4;
  FcaConfig cfg;  // default zigzag frequencies
  FcaLayer<double> fca("t.fca", c, h, w, cfg, rng);
  Tensor<double> xt = random_tensor({1, c, h, w}, rng);
  for (int64_t i = 0; i < xt.numel(); ++i) xt[i] = std::abs(xt[i]) + 0.1;
  Var<double> x(xt);
  Var<double> y = fca.forward(x);
  for (int64_t i = 0; i < y.value().numel(); ++i) {
    double ratio = y.value()[i] / x.value()[i];
    CHECK(ratio > 0.0);
    CHECK(ratio < 1.0);
  }
}

TEST_CASE("FCA rejects inputs that differ from construction dims") {
  RandomStream rng(14);
  FcaConfig cfg;
  FcaLayer<double> fca("t.fca", 16, 4, 4, cfg, rng);
  Var<double> x(random_tensor({1, 16, 8, 8}, rng));
  CHECK_THROWS_AS(fca.forward(x), ShapeError);
}

TEST_CASE("FCA forward passes a finite-difference gradient check") {
  RandomStream rng(15);
  FcaConfig cfg;
  cfg.channel_groups = 2;
  cfg.reduction_ratio = 2;
  FcaLayer<double> fca("t.fca", 4, 3, 3, cfg, rng);
  Var<double> x(random_tensor({1, 4, 3, 3}, rng));
  Var<double> probe(random_tensor({1, 4, 3, 3}, rng));
  auto f = [&] { return sum_all(mul(fca.forward(x), probe)); };
  CHECK(gradcheck(f, {x, fca.fc1.weight.var, fca.fc2.weight.var,
                      fca.fc1.bias.var, fca.fc2.bias.var}) < 1e-3);
}

TEST_CASE("instance norm examples: constant channel and symmetric pair") {
  // Constant channel: normalized value 0, so the output is the affine shift.
  Var<double> x(Tensor<double>::full(Shape{1, 1, 2, 2}, 3.7));
  Var<double> gamma(Tensor<double>::full(Shape{1}, 2.0), true);
  Var<double> beta(Tensor<double>::full(Shape{1}, -0.25), true);
  Var<double> y = instance_norm(x, gamma, beta);
  for (int64_t i = 0; i < 4; ++i)
    CHECK(y.value()[i] == doctest::Approx(-0.25).epsilon(1e-9));

  // A {-1, +1} channel is already zero-mean unit-variance up to eps.
  Tensor<double> pm(Shape{1, 1, 1, 2});
  pm[0] = -1.0;
  pm[1] = 1.0;
  Var<double> z = instance_norm(Var<double>(pm), Var<double>(), Var<double>());
  CHECK(z.value()[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(z.value()[1] == doctest::Approx(1.0).epsilon(1e-4));
}
