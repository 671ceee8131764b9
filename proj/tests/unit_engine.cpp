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

#include <sndcr/conv.hpp>
#include <sndcr/gradcheck.hpp>
#include <sndcr/nn.hpp>
#include <sndcr/ops.hpp>
#include <sndcr/rng.hpp>

using namespace sndcr;

namespace {

Tensor<double> random_tensor(Shape shape, RandomStream& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.gaussian(0.0, scale);
  return t;
}

}  // namespace

TEST_CASE("matmul matches a direct triple loop") {
  RandomStream rng(11);
  Var<double> a(random_tensor({4, 5}, rng));
  Var<double> b(random_tensor({5, 3}, rng));
  Var<double> c = matmul(a, b);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 5; ++k) s += a.value().at2(i, k) * b.value().at2(k, j);
      CHECK(c.value().at2(i, j) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("backward accumulates through shared subexpressions") {
  // y = (x + x) * x = 2 x^2, dy/dx = 4x
  Var<double> x(Tensor<double>::scalar(3.0), true);
  Var<double> y = mul(add(x, x), x);
  y = sum_all(y);
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("elementwise and reduction ops pass finite-difference gradcheck") {
  RandomStream rng(7);
  Var<double> a(random_tensor({3, 4}, rng));
  Var<double> b(random_tensor({3, 4}, rng));
  auto make = [&]() {
    Var<double> h = mul(tanh_op(a), sigmoid(b));
    h = add(h, softplus(sub(a, b)));
    return mean_all(relu(h));
  };
  CHECK(gradcheck(make, {a, b}) < 1e-6);
}

TEST_CASE("l1 and frobenius distances pass gradcheck away from ties") {
  RandomStream rng(19);
  Var<double> a(random_tensor({4, 4}, rng));
  Var<double> b(random_tensor({4, 4}, rng));
  CHECK(gradcheck([&] { return l1_distance(a, b); }, {a, b}, 1e-6) < 1e-4);
  CHECK(gradcheck([&] { return frobenius_distance(a, b); }, {a, b}) < 1e-6);
}

TEST_CASE("matmul, matvec, dot, gather, normalize gradchecks") {
  RandomStream rng(23);
  Var<double> a(random_tensor({3, 4}, rng));
  Var<double> b(random_tensor({4, 2}, rng));
  CHECK(gradcheck([&] { return sum_all(matmul(a, b)); }, {a, b}) < 1e-6);

  Var<double> m(random_tensor({3, 5}, rng));
  Var<double> v(random_tensor({5}, rng));
  CHECK(gradcheck([&] { return sum_all(matvec(m, v)); }, {m, v}) < 1e-6);

  Var<double> p(random_tensor({6}, rng));
  Var<double> q(random_tensor({6}, rng));
  CHECK(gradcheck([&] { return dot(p, q); }, {p, q}) < 1e-6);

  Var<double> g(random_tensor({5, 3}, rng));
  CHECK(gradcheck([&] { return sum_all(mul(gather_rows(g, {4, 0, 4}),
                                           gather_rows(g, {1, 2, 3}))); },
                  {g}) < 1e-6);

  Var<double> n(random_tensor({4, 6}, rng));
  Var<double> w(random_tensor({4, 6}, rng));
  CHECK(gradcheck([&] { return sum_all(mul(l2_normalize_rows(n), w)); },
                  {n, w}) < 1e-6);
}

TEST_CASE("logsumexp is stable and correct") {
  Var<double> x(Tensor<double>(Shape{3}, {1000.0, 999.0, 998.0}));
  double expect = 1000.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-2.0));
  CHECK(logsumexp(x).value().item() == doctest::Approx(expect).epsilon(1e-12));

  RandomStream rng(3);
  Var<double> y(random_tensor({7}, rng));
  CHECK(gradcheck([&] { return logsumexp(y); }, {y}) < 1e-6);
}

TEST_CASE("conv2d zero padding matches a direct loop") {
  RandomStream rng(31);
  Var<double> x(random_tensor({2, 3, 5, 6}, rng));
  Var<double> w(random_tensor({4, 3, 3, 3}, rng));
  Var<double> b(random_tensor({4}, rng));
  Var<double> y = conv2d(x, w, b, ConvOpts{2, 1, PadMode::kZero});
  CHECK(y.shape() == Shape{2, 4, 3, 3});
  for (int bi = 0; bi < 2; ++bi)
    for (int co = 0; co < 4; ++co)
      for (int oh = 0; oh < 3; ++oh)
        for (int ow = 0; ow < 3; ++ow) {
          double s = b.value()[co];
          for (int ci = 0; ci < 3; ++ci)
            for (int kh = 0; kh < 3; ++kh)
              for (int kw = 0; kw < 3; ++kw) {
                int ih = oh * 2 - 1 + kh, iw = ow * 2 - 1 + kw;
                if (ih < 0 || ih >= 5 || iw < 0 || iw >= 6) continue;
                s += x.value().at4(bi, ci, ih, iw) * w.value().at4(co, ci, kh, kw);
              }
          CHECK(y.value().at4(bi, co, oh, ow) == doctest::Approx(s).epsilon(1e-10));
        }
}

TEST_CASE("conv2d reflect padding matches a direct loop") {
  RandomStream rng(37);
  Var<double> x(random_tensor({1, 2, 6, 6}, rng));
  Var<double> w(random_tensor({3, 2, 3, 3}, rng));
  Var<double> y = conv2d(x, w, Var<double>(), ConvOpts{1, 1, PadMode::kReflect});
  CHECK(y.shape() == Shape{1, 3, 6, 6});
  auto refl = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  for (int co = 0; co < 3; ++co)
    for (int oh = 0; oh < 6; ++oh)
      for (int ow = 0; ow < 6; ++ow) {
        double s = 0;
        for (int ci = 0; ci < 2; ++ci)
          for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 3; ++kw)
              s += x.value().at4(0, ci, refl(oh - 1 + kh, 6), refl(ow - 1 + kw, 6)) *
                   w.value().at4(co, ci, kh, kw);
        CHECK(y.value().at4(0, co, oh, ow) == doctest::Approx(s).epsilon(1e-10));
      }
}

TEST_CASE("conv2d gradcheck, both padding modes") {
  RandomStream rng(41);
  Var<double> x(random_tensor({1, 2, 5, 5}, rng));
  Var<double> w(random_tensor({3, 2, 3, 3}, rng));
  Var<double> b(random_tensor({3}, rng));
  Var<double> probe(random_tensor({1, 3, 3, 3}, rng));
  CHECK(gradcheck(
            [&] {
              return sum_all(mul(conv2d(x, w, b, ConvOpts{2, 1, PadMode::kZero}),
                                 probe));
            },
            {x, w, b}) < 1e-6);
  Var<double> probe2(random_tensor({1, 3, 5, 5}, rng));
  CHECK(gradcheck(
            [&] {
              return sum_all(mul(
                  conv2d(x, w, b, ConvOpts{1, 1, PadMode::kReflect}), probe2));
            },
            {x, w, b}) < 1e-6);
}

TEST_CASE("conv_transpose2d doubles spatial size and passes gradcheck") {
  RandomStream rng(43);
  Var<double> x(random_tensor({1, 3, 4, 4}, rng));
  Var<double> w(random_tensor({3, 2, 3, 3}, rng));
  Var<double> b(random_tensor({2}, rng));
  Var<double> y = conv_transpose2d(x, w, b, 2, 1, 1);
  CHECK(y.shape() == Shape{1, 2, 8, 8});
  Var<double> probe(random_tensor({1, 2, 8, 8}, rng));
  CHECK(gradcheck(
            [&] { return sum_all(mul(conv_transpose2d(x, w, b, 2, 1, 1), probe)); },
            {x, w, b}) < 1e-6);
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  // <conv(x), y> == <x, conv_transpose(y)> for matching geometry, no bias.
  RandomStream rng(47);
  Var<double> x(random_tensor({1, 2, 6, 6}, rng));
  Var<double> y(random_tensor({1, 3, 3, 3}, rng));
  Var<double> w(random_tensor({3, 2, 3, 3}, rng));  // conv weight [Cout, Cin, k, k]
  Var<double> cx = conv2d(x, w, Var<double>(), ConvOpts{2, 1, PadMode::kZero});
  // Transposed weight layout is [Cin, Cout, k, k] of the same kernel.
  Tensor<double> wt(Shape{3, 2, 3, 3});
  Var<double> wt_var(wt);
  // conv_transpose2d expects [Cin_of_transposed == Cout_of_conv, ...].
  Var<double> ty = conv_transpose2d(y, w, Var<double>(), 2, 1, 1);
  double lhs = sum_all(mul(cx, y)).value().item();
  double rhs = sum_all(mul(x, ty)).value().item();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("maxpool2x2 and instance_norm gradcheck") {
  RandomStream rng(53);
  Var<double> x(random_tensor({1, 2, 4, 4}, rng));
  Var<double> probe(random_tensor({1, 2, 2, 2}, rng));
  CHECK(gradcheck([&] { return sum_all(mul(maxpool2x2(x), probe)); }, {x}) < 1e-5);

  Var<double> g(random_tensor({2}, rng, 0.5));
  Var<double> be(random_tensor({2}, rng, 0.5));
  Var<double> probe2(random_tensor({1, 2, 4, 4}, rng));
  CHECK(gradcheck(
            [&] { return sum_all(mul(instance_norm(x, g, be), probe2)); },
            {x, g, be}) < 1e-5);
}

TEST_CASE("instance_norm normalizes spatial statistics") {
  RandomStream rng(59);
  Var<double> x(random_tensor({2, 3, 8, 8}, rng, 3.0));
  Var<double> y = instance_norm(x, Var<double>(), Var<double>());
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c) {
      double mu = 0, var = 0;
      for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w) mu += y.value().at4(b, c, h, w);
      mu /= 64.0;
      for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w) {
          double d = y.value().at4(b, c, h, w) - mu;
          var += d * d;
        }
      var /= 64.0;
      CHECK(std::abs(mu) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("channel_scale, basis_pool, add_rowvec, div_by_scalar gradchecks") {
  RandomStream rng(61);
  Var<double> x(random_tensor({1, 4, 3, 3}, rng));
  Var<double> s(random_tensor({1, 4}, rng));
  CHECK(gradcheck([&] { return sum_all(channel_scale(x, s)); }, {x, s}) < 1e-6);

  Tensor<double> basis = random_tensor({4, 3, 3}, rng);
  Var<double> probe(random_tensor({1, 4}, rng));
  CHECK(gradcheck([&] { return sum_all(mul(basis_pool(x, basis), probe)); },
                  {x}) < 1e-6);

  Var<double> a(random_tensor({3, 4}, rng));
  Var<double> v(random_tensor({4}, rng));
  CHECK(gradcheck([&] { return sum_all(square(add_rowvec(a, v))); }, {a, v}) <
        1e-6);

  Var<double> num(random_tensor({3, 3}, rng));
  Var<double> den(Tensor<double>::scalar(1.7), true);
  CHECK(gradcheck([&] { return sum_all(square(div_by_scalar(num, den))); },
                  {num, den}) < 1e-6);
}

TEST_CASE("spatial_rows round-trips layout and carries gradient") {
  RandomStream rng(67);
  Var<double> x(random_tensor({1, 3, 2, 2}, rng));
  Var<double> rows = spatial_rows(x, 0);
  CHECK(rows.shape() == Shape{4, 3});
  CHECK(rows.value().at2(1, 2) == x.value().at4(0, 2, 0, 1));
  Var<double> probe(random_tensor({4, 3}, rng));
  CHECK(gradcheck([&] { return sum_all(mul(spatial_rows(x, 0), probe)); }, {x}) <
        1e-6);
}

TEST_CASE("rng streams are reproducible and serializable") {
  RandomStream a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  std::string state = a.serialize();
  double x1 = a.gaussian();
  RandomStream c(1);
  c.restore(state);
  CHECK(c.gaussian() == x1);

  CHECK(derive_seed(7, "data") != derive_seed(7, "init"));
  CHECK(derive_seed(7, "data") == derive_seed(7, "data"));
}
