#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "petl/gradcam.hpp"
#include "petl/infer.hpp"
#include "petl/layers.hpp"
#include "petl/model.hpp"
#include "petl/rng.hpp"

using namespace petl;

namespace {

using DTensor = TensorT<double>;

Tensor random_crop(Rng& rng) {
  Tensor t({160, 160, 3});
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (auto& v : t.data) v = d(rng);
  return t;
}

}  // namespace

TEST_CASE("neuron importance is the spatial mean of the gradient") {
  // Single channel, 2x2 gradients [[1,2],[3,4]] -> alpha = 2.5.
  DTensor dA({2, 2, 1});
  dA.data = {1, 2, 3, 4};
  const auto alpha = neuron_importance(dA);
  REQUIRE(alpha.size() == 1);
  CHECK(alpha[0] == doctest::Approx(2.5));

  // A channel with identically zero gradient contributes zero weight.
  DTensor two({1, 2, 2, 2});
  two.data = {1, 0, 2, 0, 3, 0, 4, 0};
  const auto a2 = neuron_importance(two);
  REQUIRE(a2.size() == 2);
  CHECK(a2[0] == doctest::Approx(2.5));
  CHECK(a2[1] == 0.0);

  CHECK_THROWS_AS(neuron_importance(DTensor({4, 4})), std::invalid_argument);
  CHECK_THROWS_AS(neuron_importance(DTensor({2, 2, 2, 2})), std::invalid_argument);
}

TEST_CASE("gradcam_map is the rectified weighted channel sum") {
  SUBCASE("zero weights give the zero map") {
    DTensor a({3, 3, 4});
    for (std::int64_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i) - 10.0;
    const auto map = gradcam_map(a, std::vector<double>(4, 0.0));
    for (double v : map.data) CHECK(v == 0.0);
  }
  SUBCASE("ReLU clamps negative combinations") {
    DTensor a({2, 2, 1});
    a.data = {-1, 2, 0, 3};
    const auto map = gradcam_map(a, std::vector<double>{1.0});
    REQUIRE(map.shape == std::vector<int>({2, 2}));
    CHECK(map.data == std::vector<double>({0, 2, 0, 3}));
  }
  SUBCASE("two channels with opposing weights") {
    DTensor a({1, 1, 2});
    a.data = {2, 5};
    const auto map = gradcam_map(a, std::vector<double>{1.0, -1.0});
    CHECK(map.data == std::vector<double>({0.0}));  // relu(2 - 5)
  }
  SUBCASE("weight count must match channels") {
    CHECK_THROWS_AS(gradcam_map(DTensor({2, 2, 3}), std::vector<double>{1.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("alpha matches finite-difference perturbation on a 2-channel toy net") {
  // Toy pipeline y = dense(GAP(A))[c] in 64-bit; alpha from one backward
  // pass must match central differences on every A entry.
  const int h = 3, w = 3, k = 2, classes = 3;
  GlobalAvgPool<double> gap;
  Dense<double> dense("toy", k, classes, 99);

  Rng rng(17);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  DTensor A({1, h, w, k});
  for (auto& v : A.data) v = d(rng);

  for (int c = 0; c < classes; ++c) {
    DTensor feat = gap.forward(A, false);
    dense.forward(feat, false);
    DTensor dlogits({1, classes});
    dlogits[c] = 1.0;
    DTensor dA = gap.backward(dense.backward(dlogits));
    const auto alpha = neuron_importance(dA);

    // Independent oracle: alpha_k = (1/Z) sum_ij dy^c/dA_ijk by central FD.
    const double eps = 1e-6;
    auto score = [&](const DTensor& a) {
      DTensor f = gap.forward(a, false);
      return dense.forward(f, false)[c];
    };
    for (int ch = 0; ch < k; ++ch) {
      double fd = 0;
      for (int i = 0; i < h * w; ++i) {
        DTensor ap = A, am = A;
        ap[i * k + ch] += eps;
        am[i * k + ch] -= eps;
        fd += (score(ap) - score(am)) / (2 * eps);
      }
      fd /= h * w;
      CHECK(alpha[ch] == doctest::Approx(fd).epsilon(1e-3));
    }
  }
}

TEST_CASE("full-model maps are 10x10, non-negative, and class-aware") {
  NetworkSpec spec;
  spec.kind = NetKind::Part;
  spec.feature = Feature::Eyes;
  Model m(spec, 23);
  Rng rng(24);
  const Tensor crop = random_crop(rng);

  const GradCamResult r = gradcam(m, crop, 2);
  CHECK(r.class_index == 2);
  REQUIRE(r.map.shape == std::vector<int>({10, 10}));
  REQUIRE(r.alpha.size() == 128);
  for (float v : r.map.data) CHECK(v >= 0.0f);

  // Negative index explains the predicted class.
  const GradCamResult pred = gradcam(m, crop, -1);
  const ProbVector probs = predict_single(m, crop);
  int argmax = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[argmax]) argmax = static_cast<int>(i);
  CHECK(pred.class_index == argmax);

  CHECK_THROWS_AS(gradcam(m, crop, 7), std::invalid_argument);
  CHECK_THROWS_AS(gradcam(m, Tensor({80, 80, 3}), 0), std::invalid_argument);
}

TEST_CASE("maps are invariant to a constant logit shift") {
  NetworkSpec spec;
  spec.kind = NetKind::Part;
  spec.feature = Feature::Mouth;
  Model m(spec, 29);
  Rng rng(30);
  const Tensor crop = random_crop(rng);
  const GradCamResult before = gradcam(m, crop, 3);

  // Shifting every output bias shifts all pre-softmax scores equally; the
  // gradient of y^c w.r.t. the activations is untouched.
  for (auto& p : m.cls_head().params())
    if (p.name == "cls.dense3.b")
      for (auto& v : p.tensor->data) v += 3.7f;
  const GradCamResult after = gradcam(m, crop, 3);
  CHECK(before.map.data == after.map.data);
  CHECK(before.alpha == after.alpha);
}

TEST_CASE("non-negativity holds across random (net, input, class) triples") {
  Rng rng(31);
  std::uniform_int_distribution<int> class_d(0, 6);
  for (int n = 0; n < 3; ++n) {
    NetworkSpec spec;
    spec.kind = NetKind::Part;
    spec.feature = kAllFeatures[n];
    Model m(spec, 100 + n);
    for (int t = 0; t < 4; ++t) {
      const GradCamResult r = gradcam(m, random_crop(rng), class_d(rng));
      for (float v : r.map.data) CHECK(v >= 0.0f);
    }
  }
}

TEST_CASE("normalize_map scales the peak to one and keeps zero maps zero") {
  Tensor map({2, 2});
  map.data = {1, 4, 0, 2};
  const Tensor n = normalize_map(map);
  CHECK(n.data == std::vector<float>({0.25f, 1.0f, 0.0f, 0.5f}));

  const Tensor z = normalize_map(Tensor({2, 2}));
  CHECK(z.data == std::vector<float>({0, 0, 0, 0}));
}

TEST_CASE("union_maps is a normalized, monotone, idempotent maximum") {
  Tensor a({2, 2});
  a.data = {2, 0, 0, 1};
  Tensor b({2, 2});
  b.data = {0, 3, 0, 3};
  const Tensor zero({2, 2});

  const Tensor u = union_maps({a, zero, zero, zero, zero});
  CHECK(u.data == normalize_map(a).data);  // union with zeros = the map itself

  const Tensor ab = union_maps({a, b});
  const Tensor ba = union_maps({b, a});
  CHECK(ab.data == ba.data);                        // commutative
  CHECK(union_maps({a, a}).data == normalize_map(a).data);  // idempotent
  for (std::int64_t i = 0; i < ab.size(); ++i) {
    CHECK(ab[i] >= normalize_map(a)[i]);  // monotone
    CHECK(ab[i] >= normalize_map(b)[i]);
  }

  Tensor other({3, 3});
  CHECK_THROWS_AS(union_maps({a, other}), std::invalid_argument);
  CHECK_THROWS_AS(union_maps({}), std::invalid_argument);
}

TEST_CASE("upsample_map follows the half-pixel bilinear convention") {
  Tensor map({2, 2});
  map.data = {0, 100, 100, 200};
  const Tensor up = upsample_map(map, 4, 4);
  REQUIRE(up.shape == std::vector<int>({4, 4}));
  const float expected[16] = {0,   25,  75,  100, 25, 50,  100, 125,
                              75, 100, 150, 175, 100, 125, 175, 200};
  for (int i = 0; i < 16; ++i) CHECK(up[i] == doctest::Approx(expected[i]).epsilon(1e-6));

  Tensor flat({3, 3});
  for (auto& v : flat.data) v = 7.0f;
  const Tensor upf = upsample_map(flat, 10, 5);
  for (float v : upf.data) CHECK(v == doctest::Approx(7.0f));
}

TEST_CASE("overlay of the zero map degrades to pure grayscale") {
  GrayImage base(16, 16);
  for (std::size_t i = 0; i < base.pixels.size(); ++i)
    base.pixels[i] = static_cast<std::uint8_t>(i);
  const RgbImage out = overlay_heatmap(base, Tensor({10, 10}));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * 16 + x) * 3;
      CHECK(out.pixels[o] == base.at(x, y));
      CHECK(out.pixels[o + 1] == base.at(x, y));
      CHECK(out.pixels[o + 2] == base.at(x, y));
    }

  // A hot map tints: the peak pixel must differ across channels.
  Tensor hot({10, 10});
  hot.data[55] = 1.0f;
  const RgbImage tinted = overlay_heatmap(base, hot);
  bool any_tint = false;
  for (std::size_t i = 0; i < tinted.pixels.size(); i += 3)
    any_tint |= tinted.pixels[i] != tinted.pixels[i + 1] ||
                tinted.pixels[i + 1] != tinted.pixels[i + 2];
  CHECK(any_tint);
}
