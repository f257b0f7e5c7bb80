#include <doctest.h>

#include <cmath>
#include <random>

#include "arn/grad_check.hpp"
#include "arn/ops.hpp"

using namespace arn;

namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
  return uniform_init(shape, lo, hi, rng, requires_grad);
}

// Values bounded away from zero, for kinked ops (relu) under fd perturbation.
Tensor random_away_from_zero(const Shape& shape, std::mt19937_64& rng, bool requires_grad,
                             double margin = 0.05) {
  Tensor t = random_tensor(shape, rng, requires_grad);
  for (auto& v : t.data()) v += v >= 0.0 ? margin : -margin;
  return t;
}

ConvLayerParams random_conv(int k, int s, int c, int stride, std::mt19937_64& rng) {
  ConvLayerParams p;
  p.kernels = random_tensor(Shape{k, s, c}, rng, true);
  p.bias = random_tensor(Shape{k}, rng, true);
  p.stride = stride;
  return p;
}

DenseParams random_dense(int out, int in, std::mt19937_64& rng) {
  DenseParams p;
  p.weights = random_tensor(Shape{out, in}, rng, true);
  p.bias = random_tensor(Shape{out}, rng, true);
  return p;
}

// loss = sum(op_output * fixed_random_weights): exercises mixed-sign output
// gradients instead of the all-ones pattern of a plain sum.
Tensor weighted_sum(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

}  // namespace

TEST_CASE("conv1d box-sum kernel") {
  Tensor x(Shape{5, 1}, std::vector<double>{1, 2, 3, 4, 5});
  ConvLayerParams p;
  p.kernels = Tensor(Shape{1, 3, 1}, std::vector<double>{1, 1, 1});
  p.bias = Tensor(Shape{1}, 0.0);
  p.stride = 1;
  Tensor y = conv1d(x, p);
  REQUIRE(y.shape() == Shape{3, 1});
  CHECK(y.data()[0] == doctest::Approx(6));
  CHECK(y.data()[1] == doctest::Approx(9));
  CHECK(y.data()[2] == doctest::Approx(12));
}

TEST_CASE("conv1d identity kernel shifts and truncates") {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor(Shape{9, 1}, rng);
  ConvLayerParams p;
  p.kernels = Tensor(Shape{1, 3, 1}, std::vector<double>{0, 1, 0});
  p.bias = Tensor(Shape{1}, 0.0);
  p.stride = 1;
  Tensor y = conv1d(x, p);
  REQUIRE(y.dim(0) == 7);
  for (int t = 0; t < 7; ++t) CHECK(y.data()[t] == doctest::Approx(x.data()[t + 1]));
}

TEST_CASE("conv1d matches a nested-loop oracle on random input") {
  std::mt19937_64 rng(11);
  const int t = 32, c = 3, k = 64, s = 5;
  Tensor x = random_tensor(Shape{t, c}, rng);
  ConvLayerParams p = random_conv(k, s, c, 1, rng);
  Tensor y = conv1d(x, p);
  REQUIRE(y.shape() == Shape{28, 64});
  // oracle loops channel-major, unlike the implementation's flattened dot
  for (int ot = 0; ot < 28; ++ot)
    for (int ok = 0; ok < k; ++ok) {
      double acc = p.bias.data()[ok];
      for (int ic = 0; ic < c; ++ic)
        for (int i = 0; i < s; ++i)
          acc += x.data()[(ot + i) * c + ic] * p.kernels.data()[(ok * s + i) * c + ic];
      CHECK(y.data()[ot * k + ok] == doctest::Approx(acc).epsilon(1e-5));
    }
}

TEST_CASE("conv1d error paths") {
  std::mt19937_64 rng(1);
  ConvLayerParams p = random_conv(2, 4, 1, 1, rng);
  CHECK_THROWS_AS(conv1d(Tensor(Shape{3, 1}, 0.0), p), ShapeError);  // window longer than input
  Tensor bad(Shape{6, 1}, 1.0);
  bad.data()[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(conv1d(bad, p), NumericError);
  CHECK_THROWS_AS(conv1d(Tensor(Shape{6, 2}, 0.0), p), ShapeError);  // channel mismatch
}

TEST_CASE("conv1d and maxpool1d output length matches enumeration for all small cases") {
  std::mt19937_64 rng(5);
  for (int t = 1; t <= 16; ++t)
    for (int s = 1; s <= t; ++s)
      for (int stride = 1; stride <= 4; ++stride) {
        int enumerated = 0;
        for (int pos = 0; pos + s <= t; pos += stride) ++enumerated;
        const int formula = (t - s) / stride + 1;
        CHECK(formula == enumerated);
        Tensor x = random_tensor(Shape{t, 2}, rng);
        ConvLayerParams p = random_conv(1, s, 2, stride, rng);
        CHECK(conv1d(x, p).dim(0) == enumerated);
        CHECK(maxpool1d(x, s, stride).dim(0) == enumerated);
      }
}

TEST_CASE("conv1d stride-1 shift equivariance on the interior") {
  std::mt19937_64 rng(17);
  const int t = 20, c = 2, k = 3, s = 5, shift = 3;
  Tensor x = random_tensor(Shape{t, c}, rng);
  ConvLayerParams p = random_conv(k, s, c, 1, rng);
  Tensor shifted(Shape{t - shift, c},
                 std::vector<double>(x.data().begin() + shift * c, x.data().end()));
  Tensor y = conv1d(x, p);
  Tensor ys = conv1d(shifted, p);
  for (int i = 0; i < ys.dim(0); ++i)
    for (int j = 0; j < k; ++j)
      CHECK(ys.data()[i * k + j] == doctest::Approx(y.data()[(i + shift) * k + j]));
}

TEST_CASE("activation examples") {
  Tensor x(Shape{3}, std::vector<double>{-1, 0, 2});
  Tensor r = relu(x);
  CHECK(r.data()[0] == 0);
  CHECK(r.data()[1] == 0);
  CHECK(r.data()[2] == 2);

  CHECK(sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));
  CHECK(tanh_op(Tensor::scalar(30.0)).value() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(tanh_op(Tensor::scalar(-30.0)).value() == doctest::Approx(-1.0).epsilon(1e-6));

  CHECK(activation_from_string("relu") == Activation::Relu);
  CHECK_THROWS_AS(activation_from_string("gelu"), ConfigError);
}

TEST_CASE("maxpool1d examples and tie routing") {
  Tensor x(Shape{4, 1}, std::vector<double>{1, 3, 2, 5});
  Tensor y = maxpool1d(x, 2, 2);
  REQUIRE(y.shape() == Shape{2, 1});
  CHECK(y.data()[0] == 3);
  CHECK(y.data()[1] == 5);

  Tensor c(Shape{6, 2}, 0.7);
  Tensor yc = maxpool1d(c, 2, 2);
  for (double v : yc.data()) CHECK(v == 0.7);

  CHECK_THROWS_AS(maxpool1d(Tensor(Shape{3, 1}, 0.0), 4, 1), ShapeError);

  // tie: gradient goes to the first occurrence
  Tensor tie(Shape{2, 1}, std::vector<double>{4.0, 4.0}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(maxpool1d(tie, 2, 2)));
  }
  CHECK(tie.grad()[0] == 1.0);
  CHECK(tie.grad()[1] == 0.0);
}

TEST_CASE("maxpool1d matches enumeration oracle on random input") {
  std::mt19937_64 rng(23);
  Tensor x = random_tensor(Shape{64, 8}, rng);
  Tensor y = maxpool1d(x, 2, 2);
  REQUIRE(y.shape() == Shape{32, 8});
  for (int t = 0; t < 32; ++t)
    for (int c = 0; c < 8; ++c)
      CHECK(y.data()[t * 8 + c] ==
            std::max(x.data()[(2 * t) * 8 + c], x.data()[(2 * t + 1) * 8 + c]));
}

TEST_CASE("global_avg_pool examples and oracle") {
  Tensor x(Shape{2, 1}, std::vector<double>{2, 4});
  CHECK(global_avg_pool(x).data()[0] == doctest::Approx(3));

  Tensor c(Shape{5, 3}, -1.25);
  Tensor cp = global_avg_pool(c);
  for (double v : cp.data()) CHECK(v == doctest::Approx(-1.25));

  std::mt19937_64 rng(29);
  Tensor r = random_tensor(Shape{28, 64}, rng);
  Tensor y = global_avg_pool(r);
  for (int ch = 0; ch < 64; ++ch) {
    double acc = 0.0;
    for (int t = 0; t < 28; ++t) acc += r.data()[t * 64 + ch];
    CHECK(y.data()[ch] == doctest::Approx(acc / 28).epsilon(1e-6));
  }
}

TEST_CASE("dense examples and oracle") {
  DenseParams id;
  id.weights = Tensor(Shape{3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  id.bias = Tensor(Shape{3}, 0.0);
  Tensor x(Shape{3}, std::vector<double>{5, -2, 7});
  Tensor y = dense(x, id);
  for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == x.data()[i]);

  DenseParams zero;
  zero.weights = Tensor(Shape{2, 3}, 0.0);
  zero.bias = Tensor(Shape{2}, std::vector<double>{1, 2});
  Tensor yz = dense(x, zero);
  CHECK(yz.data()[0] == 1);
  CHECK(yz.data()[1] == 2);

  std::mt19937_64 rng(31);
  DenseParams p = random_dense(4, 8, rng);
  Tensor xr = random_tensor(Shape{8}, rng);
  Tensor yr = dense(xr, p);
  for (int o = 0; o < 4; ++o) {
    double acc = p.bias.data()[o];
    for (int i = 0; i < 8; ++i) acc += p.weights.data()[o * 8 + i] * xr.data()[i];
    CHECK(yr.data()[o] == doctest::Approx(acc).epsilon(1e-6));
  }

  CHECK_THROWS_AS(dense(Tensor(Shape{5}, 0.0), p), ShapeError);
}

TEST_CASE("batchnorm training and inference behavior") {
  std::mt19937_64 rng(37);
  const int rows = 64, ch = 4;
  BatchNormState state = BatchNormState::make(ch);

  SUBCASE("already standardized input passes through") {
    // build rows with exact zero mean, unit variance per channel
    Tensor x(Shape{rows, ch}, 0.0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < ch; ++c) x.data()[r * ch + c] = (r % 2 == 0) ? 1.0 : -1.0;
    Tensor y = batchnorm(x, state);
    for (std::size_t i = 0; i < y.data().size(); ++i)
      CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));
  }

  SUBCASE("gamma zero yields beta") {
    for (auto& g : state.gamma.data()) g = 0.0;
    for (auto& b : state.beta.data()) b = 2.5;
    Tensor x = random_tensor(Shape{rows, ch}, rng);
    Tensor y = batchnorm(x, state);
    for (double v : y.data()) CHECK(v == doctest::Approx(2.5));
  }

  SUBCASE("training output has zero mean and unit variance per channel") {
    Tensor x = random_tensor(Shape{rows, ch}, rng, false, -3.0, 5.0);
    Tensor y = batchnorm(x, state);
    for (int c = 0; c < ch; ++c) {
      double mean = 0.0, var = 0.0;
      for (int r = 0; r < rows; ++r) mean += y.data()[r * ch + c];
      mean /= rows;
      for (int r = 0; r < rows; ++r) {
        const double d = y.data()[r * ch + c] - mean;
        var += d * d;
      }
      var /= rows;
      CHECK(std::fabs(mean) < 1e-5);
      CHECK(std::fabs(var - 1.0) < 1e-3);
    }
  }

  SUBCASE("constant channel is safe via epsilon") {
    Tensor x(Shape{rows, ch}, 7.0);
    Tensor y = batchnorm(x, state);
    y.require_finite("bn output");
    for (double v : y.data()) CHECK(v == doctest::Approx(0.0));
  }

  SUBCASE("inference uses running statistics") {
    Tensor x = random_tensor(Shape{rows, ch}, rng, false, 2.0, 4.0);
    for (int i = 0; i < 50; ++i) batchnorm(x, state);  // converge running stats
    state.training = false;
    Tensor y = batchnorm(x, state);
    double mean = 0.0;
    for (double v : y.data()) mean += v;
    CHECK(std::fabs(mean / y.size()) < 0.05);
    // single-row input is fine in inference mode
    CHECK_NOTHROW(batchnorm(Tensor(Shape{1, ch}, 0.0), state));
    state.training = true;
    CHECK_THROWS_AS(batchnorm(Tensor(Shape{1, ch}, 0.0), state), ShapeError);
  }

  SUBCASE("channel mismatch is a shape error") {
    CHECK_THROWS_AS(batchnorm(Tensor(Shape{8, 3}, 0.0), state), ShapeError);
  }
}

TEST_CASE("concat_features examples") {
  Tensor a(Shape{2}, std::vector<double>{1, 2});
  Tensor b(Shape{1}, std::vector<double>{3});
  Tensor y = concat_features(a, b);
  REQUIRE(y.shape() == Shape{3});
  CHECK(y.data()[0] == 1);
  CHECK(y.data()[1] == 2);
  CHECK(y.data()[2] == 3);

  Tensor empty(Shape{0}, std::vector<double>{});
  Tensor ye = concat_features(a, empty);
  REQUIRE(ye.shape() == Shape{2});
  CHECK(ye.data()[0] == 1);
  CHECK(ye.data()[1] == 2);

  std::mt19937_64 rng(41);
  Tensor u = random_tensor(Shape{512}, rng);
  Tensor v = random_tensor(Shape{512}, rng);
  Tensor w = concat_features(u, v);
  REQUIRE(w.dim(0) == 1024);
  for (int i = 0; i < 512; ++i) {
    CHECK(w.data()[i] == u.data()[i]);
    CHECK(w.data()[512 + i] == v.data()[i]);
  }

  CHECK_THROWS_AS(concat_features(Tensor(Shape{2, 3}, 0.0), Tensor(Shape{3, 3}, 0.0)),
                  ShapeError);
}

TEST_CASE("softmax examples, stability, and properties") {
  Tensor u(Shape{4}, 1.7);
  Tensor pu = softmax(u);
  for (double v : pu.data()) CHECK(v == doctest::Approx(0.25));

  Tensor big(Shape{2}, std::vector<double>{1000, 0});
  Tensor pb = softmax(big);
  pb.require_finite("softmax");
  CHECK(pb.data()[0] == doctest::Approx(1.0));
  CHECK(pb.data()[1] == doctest::Approx(0.0));

  Tensor z(Shape{3}, std::vector<double>{1, 2, 3});
  Tensor p = softmax(z);
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i)
    CHECK(p.data()[i] == doctest::Approx(std::exp(1.0 + i) / denom).epsilon(1e-7));

  std::mt19937_64 rng(43);
  for (int seed = 0; seed < 10; ++seed) {
    Tensor zr = random_tensor(Shape{7}, rng, false, -10.0, 10.0);
    Tensor pr = softmax(zr);
    double total = 0.0;
    int argmax_z = 0, argmax_p = 0;
    for (int i = 0; i < 7; ++i) {
      total += pr.data()[i];
      if (zr.data()[i] > zr.data()[argmax_z]) argmax_z = i;
      if (pr.data()[i] > pr.data()[argmax_p]) argmax_p = i;
    }
    CHECK(std::fabs(total - 1.0) < 1e-6);
    CHECK(argmax_z == argmax_p);
  }
}

TEST_CASE("cross entropy examples and fused agreement") {
  Tensor onehot(Shape{1, 3}, std::vector<double>{0, 1, 0});
  CHECK(cross_entropy_loss(onehot, onehot).value() == doctest::Approx(0.0).epsilon(1e-9));

  Tensor up(Shape{1, 4}, 0.25);
  Tensor q4(Shape{1, 4}, std::vector<double>{0, 0, 1, 0});
  CHECK(cross_entropy_loss(up, q4).value() == doctest::Approx(std::log(4.0)));

  std::mt19937_64 rng(47);
  const int n = 6, k = 5;
  Tensor logits = random_tensor(Shape{n, k}, rng, true, -2.0, 2.0);
  Tensor q(Shape{n, k}, 0.0);
  std::uniform_int_distribution<int> cls(0, k - 1);
  for (int i = 0; i < n; ++i) q.data()[i * k + cls(rng)] = 1.0;

  // 64-bit direct-summation oracle
  Tensor p = softmax(logits);
  double oracle = 0.0;
  for (int i = 0; i < n * k; ++i) oracle -= q.data()[i] * std::log(std::max(p.data()[i], 1e-12));
  oracle /= n;
  CHECK(cross_entropy_loss(p, q).value() == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(softmax_cross_entropy(logits, q).value() == doctest::Approx(oracle).epsilon(1e-9));

  // fused gradient equals (p - q)/N
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(softmax_cross_entropy(logits, q));
  }
  for (int i = 0; i < n * k; ++i)
    CHECK(logits.grad()[i] == doctest::Approx((p.data()[i] - q.data()[i]) / n).epsilon(1e-9));
}

TEST_CASE("mse examples") {
  Tensor x(Shape{3}, std::vector<double>{1, 2, 3});
  CHECK(mse_loss(x, x).value() == 0.0);
  CHECK(mse_loss(Tensor(Shape{2}, 0.0), Tensor(Shape{2}, 1.0)).value() == doctest::Approx(1.0));

  std::mt19937_64 rng(53);
  Tensor a = random_tensor(Shape{4, 7}, rng);
  Tensor b = random_tensor(Shape{4, 7}, rng);
  double oracle = 0.0;
  for (int i = 0; i < 28; ++i) {
    const double d = a.data()[i] - b.data()[i];
    oracle += d * d;
  }
  CHECK(mse_loss(a, b).value() == doctest::Approx(oracle / 28).epsilon(1e-7));
  CHECK_THROWS_AS(mse_loss(a, Tensor(Shape{3}, 0.0)), ShapeError);
}

TEST_CASE("dropout semantics") {
  std::mt19937_64 rng(59);
  Tensor x = random_tensor(Shape{40}, rng);

  Tensor same_rate0 = dropout(x, 0.0, true, 1);
  CHECK(same_rate0.node() == x.node());  // identity, bit-exact

  Tensor same_infer = dropout(x, 0.9, false, 1);
  CHECK(same_infer.node() == x.node());

  Tensor ones(Shape{100000}, 1.0);
  Tensor d = dropout(ones, 0.5, true, 77);
  std::size_t survivors = 0;
  for (double v : d.data()) {
    CHECK((v == 0.0 || v == 2.0));
    if (v != 0.0) ++survivors;
  }
  const double fraction = static_cast<double>(survivors) / 100000.0;
  CHECK(std::fabs(fraction - 0.5) < 0.01);

  Tensor d2 = dropout(ones, 0.5, true, 77);
  for (std::size_t i = 0; i < d.data().size(); ++i) CHECK(d.data()[i] == d2.data()[i]);

  CHECK_THROWS_AS(dropout(x, 1.0, true, 1), ConfigError);
  CHECK_THROWS_AS(dropout(x, -0.1, true, 1), ConfigError);
}

TEST_CASE("pad, slice, reshape plumbing") {
  Tensor x(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor p = pad1d(x, 1, 2);
  REQUIRE(p.shape() == Shape{5, 2});
  CHECK(p.data()[0] == 0);
  CHECK(p.data()[2] == 1);
  CHECK(p.data()[5] == 4);
  CHECK(p.data()[8] == 0);

  Tensor s = slice_rows(p, 1, 3);
  REQUIRE(s.shape() == Shape{2, 2});
  for (int i = 0; i < 4; ++i) CHECK(s.data()[i] == x.data()[i]);

  Tensor r = reshape(x, Shape{4});
  REQUIRE(r.shape() == Shape{4});
  CHECK_THROWS_AS(reshape(x, Shape{5}), ShapeError);
  CHECK_THROWS_AS(slice_rows(x, 1, 1), ShapeError);
}

// Per-op finite-difference checks: max relative error < 1e-3 at h=1e-3 on
// random small tensors, 10 seeds each.
TEST_CASE("gradient checks for every differentiable op") {
  const double tol = 1e-3;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);

    SUBCASE("") {}  // keep doctest quiet about empty case sets

    {
      Tensor x = random_tensor(Shape{4, 9, 3}, rng, true);
      ConvLayerParams p = random_conv(5, 3, 3, 2, rng);
      Tensor w = random_tensor(Shape{4, 4, 5}, rng);
      std::vector<Tensor> params{x, p.kernels, p.bias};
      auto f = [&]() { return weighted_sum(conv1d(x, p), w); };
      CHECK(grad_check(f, params) < tol);
    }
    {
      Tensor x = random_tensor(Shape{6, 4}, rng, true);
      Tensor w = random_tensor(Shape{6, 4}, rng);
      DenseParams p = random_dense(4, 4, rng);
      std::vector<Tensor> params{x, p.weights, p.bias};
      auto f = [&]() { return weighted_sum(dense(x, p), w); };
      CHECK(grad_check(f, params) < tol);
    }
    {
      Tensor x = random_away_from_zero(Shape{5, 7}, rng, true);
      Tensor w = random_tensor(Shape{5, 7}, rng);
      std::vector<Tensor> params{x};
      auto fr = [&]() { return weighted_sum(relu(x), w); };
      CHECK(grad_check(fr, params) < tol);
      auto fs = [&]() { return weighted_sum(sigmoid(x), w); };
      CHECK(grad_check(fs, params) < tol);
      auto ft = [&]() { return weighted_sum(tanh_op(x), w); };
      CHECK(grad_check(ft, params) < tol);
    }
    {
      // spread values out so fd steps cannot flip a pool argmax
      Tensor x(Shape{8, 3}, 0.0, true);
      std::vector<int> perm(24);
      for (int i = 0; i < 24; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < 24; ++i) x.data()[i] = 0.1 * perm[i];
      Tensor w = random_tensor(Shape{3, 3}, rng);
      std::vector<Tensor> params{x};
      auto f = [&]() { return weighted_sum(maxpool1d(x, 3, 2), w); };
      CHECK(grad_check(f, params) < tol);
    }
    {
      Tensor x = random_tensor(Shape{7, 4}, rng, true);
      Tensor w = random_tensor(Shape{4}, rng);
      std::vector<Tensor> params{x};
      auto f = [&]() { return weighted_sum(global_avg_pool(x), w); };
      CHECK(grad_check(f, params) < tol);
    }
    {
      Tensor x = random_tensor(Shape{6, 3}, rng, true);
      BatchNormState bn = BatchNormState::make(3);
      bn.gamma = random_tensor(Shape{3}, rng, true, 0.5, 1.5);
      bn.beta = random_tensor(Shape{3}, rng, true);
      Tensor w = random_tensor(Shape{6, 3}, rng);
      std::vector<Tensor> params{x, bn.gamma, bn.beta};
      auto f = [&]() { return weighted_sum(batchnorm(x, bn), w); };
      CHECK(grad_check(f, params) < tol);  // fixed-batch training mode
      bn.training = false;
      CHECK(grad_check(f, params) < tol);  // inference mode
    }
    {
      Tensor a = random_tensor(Shape{3, 4}, rng, true);
      Tensor b = random_tensor(Shape{3, 2}, rng, true);
      Tensor w = random_tensor(Shape{3, 6}, rng);
      std::vector<Tensor> params{a, b};
      auto f = [&]() { return weighted_sum(concat_features(a, b), w); };
      CHECK(grad_check(f, params) < tol);
    }
    {
      Tensor z = random_tensor(Shape{4, 5}, rng, true);
      Tensor q(Shape{4, 5}, 0.0);
      std::uniform_int_distribution<int> cls(0, 4);
      for (int i = 0; i < 4; ++i) q.data()[i * 5 + cls(rng)] = 1.0;
      std::vector<Tensor> params{z};
      auto composed = [&]() { return cross_entropy_loss(softmax(z), q); };
      CHECK(grad_check(composed, params) < tol);
      auto fused = [&]() { return softmax_cross_entropy(z, q); };
      CHECK(grad_check(fused, params) < tol);
    }
    {
      Tensor x = random_tensor(Shape{3, 4}, rng, true);
      Tensor t = random_tensor(Shape{3, 4}, rng);
      std::vector<Tensor> params{x};
      auto f = [&]() { return mse_loss(x, t); };
      CHECK(grad_check(f, params) < tol);
    }
    {
      Tensor x = random_tensor(Shape{4, 3}, rng, true);
      Tensor w6 = random_tensor(Shape{6, 3}, rng);
      std::vector<Tensor> params{x};
      auto fp = [&]() { return weighted_sum(pad1d(x, 1, 1), w6); };
      CHECK(grad_check(fp, params) < tol);
      Tensor w2 = random_tensor(Shape{2, 3}, rng);
      auto fs = [&]() { return weighted_sum(slice_rows(x, 1, 3), w2); };
      CHECK(grad_check(fs, params) < tol);
      Tensor w12 = random_tensor(Shape{12}, rng);
      auto fre = [&]() { return weighted_sum(reshape(x, Shape{12}), w12); };
      CHECK(grad_check(fre, params) < tol);
    }
    {
      Tensor a = random_tensor(Shape{5}, rng, true);
      Tensor b = random_tensor(Shape{5}, rng, true);
      Tensor w = random_tensor(Shape{5}, rng);
      std::vector<Tensor> params{a, b};
      auto fa = [&]() { return weighted_sum(add(a, b), w); };
      CHECK(grad_check(fa, params) < tol);
      auto fm = [&]() { return weighted_sum(mul(a, b), w); };
      CHECK(grad_check(fm, params) < tol);
    }
    {
      // dropout with a fixed seed is deterministic, so its mask gradient
      // is checkable like any other linear map
      Tensor x = random_tensor(Shape{10}, rng, true);
      Tensor w = random_tensor(Shape{10}, rng);
      std::vector<Tensor> params{x};
      auto f = [&]() { return weighted_sum(dropout(x, 0.3, true, 99), w); };
      CHECK(grad_check(f, params) < tol);
    }
  }
}
