#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <memory>

#include "petl/layers.hpp"
#include "petl/losses.hpp"
#include "petl/optim.hpp"
#include "petl/rng.hpp"
#include "petl/tensor.hpp"

using namespace petl;

namespace {

using DTensor = TensorT<double>;

DTensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  DTensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

// J(x) = sum(dy .* f(x)); analytic gradients from one backward pass are
// compared against central finite differences, the independent oracle.
constexpr double kStep = 1e-5;
constexpr double kRelTol = 1e-4;

bool close(double fd, double an) {
  const double diff = std::abs(fd - an);
  if (diff < 1e-9) return true;
  return diff / std::max({std::abs(fd), std::abs(an), 1e-6}) < kRelTol;
}

double objective(Layer<double>& layer, const DTensor& x, const DTensor& dy, bool train) {
  const DTensor y = layer.forward(x, train);
  double j = 0;
  for (std::int64_t i = 0; i < y.size(); ++i) j += dy[i] * y[i];
  return j;
}

// Checks d J / d x and d J / d params for one layer instance.
void check_layer(Layer<double>& layer, std::vector<int> in_shape, Rng& rng,
                 bool train = true) {
  DTensor x = random_tensor(in_shape, rng);
  DTensor y = layer.forward(x, train);
  DTensor dy = random_tensor(y.shape, rng);

  for (auto& p : layer.params()) p.tensor->zero_grad();
  layer.forward(x, train);
  DTensor dx = layer.backward(dy);

  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + kStep;
    const double jp = objective(layer, x, dy, train);
    x[i] = keep - kStep;
    const double jm = objective(layer, x, dy, train);
    x[i] = keep;
    const double fd = (jp - jm) / (2 * kStep);
    INFO("input grad at " << i << ": fd=" << fd << " analytic=" << dx[i]);
    CHECK(close(fd, dx[i]));
  }

  for (auto& p : layer.params()) {
    for (std::size_t i = 0; i < p.tensor->data.size(); ++i) {
      const double keep = p.tensor->data[i];
      p.tensor->data[i] = keep + kStep;
      const double jp = objective(layer, x, dy, train);
      p.tensor->data[i] = keep - kStep;
      const double jm = objective(layer, x, dy, train);
      p.tensor->data[i] = keep;
      const double fd = (jp - jm) / (2 * kStep);
      INFO(p.name << " grad at " << i << ": fd=" << fd << " analytic=" << p.tensor->grad[i]);
      CHECK(close(fd, p.tensor->grad[i]));
    }
  }
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.shape_str() == "[2,3,4]");
  CHECK_THROWS_AS(Tensor({2, 0, 4}), std::invalid_argument);
  CHECK_THROWS_WITH(check_same_shape({2, 3}, {2, 4}, "op"),
                    doctest::Contains("at axis 1 (3 vs 4)"));
}

TEST_CASE("gemm against hand-computed product") {
  // [2x3] * [3x2]
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c({2, 2});
  gemm(false, false, 2, 2, 3, 1.0f, a.data.data(), 3, b.data.data(), 2, 0.0f,
       c.data.data(), 2);
  CHECK(c[0] == doctest::Approx(58));
  CHECK(c[1] == doctest::Approx(64));
  CHECK(c[2] == doctest::Approx(139));
  CHECK(c[3] == doctest::Approx(154));
}

TEST_CASE("softmax hand value [1,2,3]") {
  Tensor l({1, 3}, {1, 2, 3});
  Tensor p = softmax(l);
  CHECK(p[0] == doctest::Approx(0.09003057).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.24472847).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(0.66524096).epsilon(1e-4));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
}

TEST_CASE("softmax shift invariance and K checks") {
  Rng rng(4);
  TensorT<double> l = random_tensor({3, 5}, rng, -4, 4);
  TensorT<double> shifted = l;
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 5; ++j) shifted[r * 5 + j] += 100.0 * (r + 1);
  auto a = softmax(l), b = softmax(shifted);
  for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]));
  CHECK_THROWS_AS(softmax(Tensor({3, 1})), std::invalid_argument);
  CHECK_THROWS_AS(softmax(Tensor({3})), std::invalid_argument);
}

TEST_CASE("l1 loss value and subgradient") {
  DTensor pred({2, 2}, {1.0, 2.0, 3.0, 5.0});
  DTensor target({2, 2}, {0.0, 2.0, 5.0, 4.0});
  auto r = l1_loss(pred, target);
  CHECK(r.loss == doctest::Approx((1 + 0 + 2 + 1) / 4.0));
  CHECK(r.grad[0] == doctest::Approx(0.25));
  CHECK(r.grad[1] == doctest::Approx(0.0));  // subgradient at the kink
  CHECK(r.grad[2] == doctest::Approx(-0.25));
  CHECK(r.grad[3] == doctest::Approx(0.25));
}

TEST_CASE("cross entropy hand value and label validation") {
  DTensor probs({2, 3}, {0.5, 0.25, 0.25, 0.1, 0.8, 0.1});
  CHECK(cross_entropy_loss(probs, {0, 1}) ==
        doctest::Approx((-std::log(0.5) - std::log(0.8)) / 2));
  CHECK_THROWS_AS(cross_entropy_loss(probs, {0, 3}), std::out_of_range);
  CHECK_THROWS_AS(cross_entropy_loss(probs, {-1, 1}), std::out_of_range);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4), c = 2 + static_cast<int>(rng() % 5);
    DTensor logits = random_tensor({n, c}, rng, -3, 3);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng() % c);
    auto res = softmax_cross_entropy(logits, labels);
    for (std::int64_t i = 0; i < logits.size(); ++i) {
      const double keep = logits[i];
      logits[i] = keep + kStep;
      const double jp = cross_entropy_loss(softmax(logits), labels);
      logits[i] = keep - kStep;
      const double jm = cross_entropy_loss(softmax(logits), labels);
      logits[i] = keep;
      CHECK(close((jp - jm) / (2 * kStep), res.dlogits[i]));
    }
  }
}

TEST_CASE("l1 gradient matches finite differences") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5);
    DTensor pred = random_tensor({n, 4}, rng);
    DTensor target = random_tensor({n, 4}, rng);
    auto res = l1_loss(pred, target);
    for (std::int64_t i = 0; i < pred.size(); ++i) {
      const double keep = pred[i];
      pred[i] = keep + kStep;
      const double jp = l1_loss(pred, target).loss;
      pred[i] = keep - kStep;
      const double jm = l1_loss(pred, target).loss;
      pred[i] = keep;
      CHECK(close((jp - jm) / (2 * kStep), res.grad[i]));
    }
  }
}

// Criterion: every layer passes finite-difference checks on 100 randomized
// small shapes (64-bit, step 1e-5, rel err < 1e-4).
TEST_CASE("randomized layer gradient checks") {
  Rng rng(99);
  int trials = 0;
  auto dims = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  for (int round = 0; round < 15; ++round) {
    {
      const int cin = dims(1, 3), cout = dims(1, 3);
      Conv2d<double> conv("conv", cin, cout, rng());
      check_layer(conv, {dims(1, 2), dims(2, 5), dims(2, 5), cin}, rng);
      ++trials;
    }
    {
      const int c = dims(1, 4);
      BatchNorm<double> bn("bn", c);
      check_layer(bn, {dims(2, 3), dims(2, 4), dims(2, 4), c}, rng, true);
      BatchNorm<double> bn_infer("bn", c);
      check_layer(bn_infer, {dims(1, 3), dims(2, 4), dims(2, 4), c}, rng, false);
      trials += 2;
    }
    {
      ReLU<double> relu;
      check_layer(relu, {dims(1, 3), dims(2, 6)}, rng);
      Sigmoid<double> sig;
      check_layer(sig, {dims(1, 3), dims(2, 6)}, rng);
      trials += 2;
    }
    {
      MaxPool2d<double> pool;
      check_layer(pool, {dims(1, 2), 2 * dims(1, 3), 2 * dims(1, 3), dims(1, 3)}, rng);
      GlobalAvgPool<double> gap;
      check_layer(gap, {dims(1, 2), dims(1, 4), dims(1, 4), dims(1, 4)}, rng);
      trials += 2;
    }
    {
      const int in = dims(1, 6), out = dims(1, 6);
      Dense<double> dense("dense", in, out, rng());
      check_layer(dense, {dims(1, 4), in}, rng);
      ++trials;
    }
  }
  CHECK(trials >= 100);
}

TEST_CASE("maxpool rejects odd spatial dims, argmax routing") {
  MaxPool2d<float> pool;
  CHECK_THROWS_WITH(pool.forward(Tensor({1, 3, 4, 1}), false),
                    doctest::Contains("odd spatial dimension"));
  Tensor x({1, 2, 2, 1}, {1, 5, 2, 3});
  Tensor y = pool.forward(x, false);
  CHECK(y.size() == 1);
  CHECK(y[0] == 5);
  Tensor dy({1, 1, 1, 1}, {2});
  Tensor dx = pool.backward(dy);
  CHECK(dx[0] == 0);
  CHECK(dx[1] == 2);  // gradient flows only to the argmax
  CHECK(dx[2] == 0);
  CHECK(dx[3] == 0);
}

TEST_CASE("adam first steps move by ~alpha * sign(grad)") {
  Tensor w({2}, {1.0f, -2.0f});
  w.requires_grad();
  Adam<float> opt({{"w", &w}}, 0.1f, 0.9f, 0.999f, 1e-7f);
  w.grad = {0.5f, -0.25f};
  opt.step();
  CHECK(w[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-4));
  w.grad = {0.5f, -0.25f};
  opt.step();
  CHECK(w[0] == doctest::Approx(1.0 - 0.2).epsilon(1e-3));
  CHECK(opt.steps() == 2);
}

TEST_CASE("adam rejects non-finite gradients atomically") {
  Tensor w({2}, {1.0f, 2.0f});
  w.requires_grad();
  Adam<float> opt({{"weights.w", &w}}, 0.1f);
  w.grad = {0.5f, std::numeric_limits<float>::quiet_NaN()};
  CHECK_THROWS_WITH(opt.step(), doctest::Contains("non-finite gradient in parameter weights.w"));
  CHECK(w[0] == 1.0f);  // untouched
  CHECK(w[1] == 2.0f);
  CHECK(opt.steps() == 0);
}

TEST_CASE("initializers: determinism, bounds, spread") {
  auto a = he_uniform_init<float>({1000}, 9, 42);
  auto b = he_uniform_init<float>({1000}, 9, 42);
  auto c = he_uniform_init<float>({1000}, 9, 43);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  const float limit = std::sqrt(6.0f / 9.0f);
  float mx = 0;
  double var = 0;
  for (float v : a.data) {
    CHECK(std::abs(v) <= limit);
    mx = std::max(mx, std::abs(v));
    var += v * v;
  }
  CHECK(mx > 0.8f * limit);                         // fills the range
  CHECK(var / 1000 == doctest::Approx(limit * limit / 3).epsilon(0.15));

  auto g = glorot_uniform_init<float>({64, 32}, 64, 32, 7);
  const float glimit = std::sqrt(6.0f / 96.0f);
  for (float v : g.data) CHECK(std::abs(v) <= glimit);
  CHECK_THROWS_AS(he_uniform_init<float>({4}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(glorot_uniform_init<float>({4}, 4, 0, 1), std::invalid_argument);
}

TEST_CASE("conv2d shape validation") {
  Conv2d<float> conv("c1", 3, 4, 1);
  CHECK_THROWS_WITH(conv.forward(Tensor({1, 4, 4, 2}), false), doctest::Contains("axis 3"));
  CHECK_THROWS_AS(conv.forward(Tensor({4, 4, 2}), false), std::invalid_argument);
  Tensor y = conv.forward(Tensor({2, 4, 4, 3}), false);
  CHECK(y.shape == std::vector<int>{2, 4, 4, 4});
}

TEST_CASE("dense matches hand-computed affine map") {
  Dense<float> d("d", 2, 2, 1);
  d.weight().data = {1, 2, 3, 4};  // [in,out] row-major
  d.bias().data = {10, 20};
  Tensor x({1, 2}, {1, 1});
  Tensor y = d.forward(x, false);
  CHECK(y[0] == doctest::Approx(1 * 1 + 1 * 3 + 10));
  CHECK(y[1] == doctest::Approx(1 * 2 + 1 * 4 + 20));
}

TEST_CASE("batchnorm train output is standardized, infer uses moving stats") {
  BatchNorm<double> bn("bn", 1, 0.5, 1e-8);
  DTensor x({4, 1}, {1, 2, 3, 4});
  DTensor y = bn.forward(x, true);
  double mean = 0, var = 0;
  for (std::int64_t i = 0; i < 4; ++i) mean += y[i] / 4;
  for (std::int64_t i = 0; i < 4; ++i) var += y[i] * y[i] / 4;
  CHECK(mean == doctest::Approx(0).epsilon(1e-9));
  CHECK(var == doctest::Approx(1).epsilon(1e-3));
  // Moving stats after one update with momentum 0.5: mean 1.25, var 1.125.
  CHECK(bn.moving_mean()[0] == doctest::Approx(0.5 * 0 + 0.5 * 2.5));
  CHECK(bn.moving_var()[0] == doctest::Approx(0.5 * 1 + 0.5 * 1.25));
  DTensor z = bn.forward(x, false);
  const double inv = 1.0 / std::sqrt(1.125 + 1e-8);
  CHECK(z[0] == doctest::Approx((1 - 1.25) * inv));
}
