#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "petl/checkpoint.hpp"
#include "petl/infer.hpp"
#include "petl/model.hpp"
#include "petl/rng.hpp"

using namespace petl;

namespace {

Tensor random_crop(Rng& rng) {
  Tensor t({160, 160, 3});
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (auto& v : t.data) v = d(rng);
  return t;
}

// Independent oracle for the summation policy: plain 64-bit accumulation and
// a first-strictly-greatest argmax.
int brute_force_label(const std::vector<ProbVector>& probs, std::vector<double>* sums_out) {
  const std::size_t c = probs.front().size();
  std::vector<double> sums(c, 0.0);
  for (std::size_t k = 0; k < c; ++k)
    for (const auto& p : probs) sums[k] += static_cast<double>(p[k]);
  int best = 0;
  for (std::size_t k = 1; k < c; ++k)
    if (sums[k] > sums[best]) best = static_cast<int>(k);
  if (sums_out) *sums_out = sums;
  return best;
}

NetworkSpec part_spec(Feature f = Feature::Nose, int classes = 7) {
  NetworkSpec s;
  s.kind = NetKind::Part;
  s.feature = f;
  s.num_classes = classes;
  return s;
}

}  // namespace

TEST_CASE("probability summation matches the hand-worked example") {
  const std::vector<ProbVector> probs = {
      {0.6f, 0.4f}, {0.6f, 0.4f}, {0.1f, 0.9f}, {0.1f, 0.9f}, {0.1f, 0.9f}};
  const EnsemblePrediction p = sum_probabilities(probs);
  CHECK(p.label == 1);
  REQUIRE(p.scores.size() == 2);
  CHECK(p.scores[0] == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(p.scores[1] == doctest::Approx(3.5).epsilon(1e-6));
  REQUIRE(p.per_model.size() == 5);
  CHECK(p.per_model[2][1] == 0.9f);
}

TEST_CASE("probability summation equals the brute-force oracle on 500 quintuples") {
  Rng rng(2024);
  std::uniform_int_distribution<int> class_d(2, 8);
  std::uniform_real_distribution<double> mass_d(0.01, 1.0);
  int trials = 0;
  for (int t = 0; t < 500; ++t) {
    const int c = class_d(rng);
    std::vector<ProbVector> probs(5, ProbVector(c));
    for (auto& p : probs) {
      double total = 0;
      std::vector<double> raw(c);
      for (auto& v : raw) total += (v = mass_d(rng));
      for (int k = 0; k < c; ++k) p[k] = static_cast<float>(raw[k] / total);
    }
    std::vector<double> want_sums;
    const int want = brute_force_label(probs, &want_sums);
    const EnsemblePrediction got = sum_probabilities(probs);
    REQUIRE(got.label == want);
    for (int k = 0; k < c; ++k)
      REQUIRE(got.scores[k] == doctest::Approx(want_sums[k]).epsilon(1e-12));
    ++trials;
  }
  CHECK(trials == 500);
}

TEST_CASE("exact ties resolve to the lowest class index") {
  CHECK(sum_probabilities({{0.5f, 0.5f}}).label == 0);
  CHECK(sum_probabilities({{0.25f, 0.25f, 0.25f, 0.25f}}).label == 0);
  // Classes 1 and 2 tie strictly above class 0.
  CHECK(sum_probabilities({{0.2f, 0.4f, 0.4f}, {0.2f, 0.4f, 0.4f}}).label == 1);
}

TEST_CASE("argmax is invariant under a shared positive scaling") {
  Rng rng(31);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<ProbVector> probs(5, ProbVector(7));
    for (auto& p : probs)
      for (auto& v : p) v = static_cast<float>(d(rng));
    const int base = sum_probabilities(probs).label;
    for (float scale : {0.125f, 4.0f}) {
      auto scaled = probs;
      for (auto& p : scaled)
        for (auto& v : p) v *= scale;
      CHECK(sum_probabilities(scaled).label == base);
    }
  }
}

TEST_CASE("summation rejects ragged class counts") {
  CHECK_THROWS_AS(sum_probabilities({{0.5f, 0.5f}, {0.3f, 0.3f, 0.4f}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sum_probabilities({}), std::invalid_argument);
}

TEST_CASE("predict_single is a well-formed softmax and pure") {
  Model m(part_spec(), 5);
  Rng rng(6);
  const Tensor crop = random_crop(rng);
  const ProbVector p1 = predict_single(m, crop);
  REQUIRE(p1.size() == 7);
  double sum = 0;
  for (float v : p1) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));

  // Purity: identical outputs on repeated calls, parameters untouched.
  const auto before = m.named_tensors();
  std::vector<std::vector<float>> snapshot;
  for (auto& t : before) snapshot.push_back(t.tensor->data);
  const ProbVector p2 = predict_single(m, crop);
  CHECK(p1 == p2);
  const auto after = m.named_tensors();
  for (std::size_t i = 0; i < after.size(); ++i)
    CHECK(after[i].tensor->data == snapshot[i]);

  // Batch-of-one shape also accepted; anything else rejected.
  Tensor batched({1, 160, 160, 3});
  batched.data = crop.data;
  CHECK(predict_single(m, batched) == p1);
  CHECK_THROWS_AS(predict_single(m, Tensor({80, 80, 3})), std::invalid_argument);
  CHECK_THROWS_AS(predict_single(m, Tensor({2, 160, 160, 3})), std::invalid_argument);
}

TEST_CASE("zeroed output layer yields the uniform distribution") {
  Model m(part_spec(Feature::Mouth, 8), 9);
  for (auto& p : m.cls_head().params())
    if (p.name.rfind("cls.dense3", 0) == 0)
      for (auto& v : p.tensor->data) v = 0.0f;
  Rng rng(10);
  const ProbVector p = predict_single(m, random_crop(rng));
  for (float v : p) CHECK(v == doctest::Approx(1.0 / 8.0).epsilon(1e-6));
}

TEST_CASE("ensemble of five identical models agrees with the single model") {
  std::vector<std::unique_ptr<Model>> owned;
  std::vector<Model*> models;
  for (int i = 0; i < 5; ++i) {
    owned.push_back(std::make_unique<Model>(part_spec(), 77));  // same seed
    models.push_back(owned.back().get());
  }
  Rng rng(12);
  const Tensor crop = random_crop(rng);
  const ProbVector single = predict_single(*models[0], crop);
  const EnsemblePrediction ens = predict_ensemble(models, crop);

  int single_arg = 0;
  for (std::size_t k = 1; k < single.size(); ++k)
    if (single[k] > single[single_arg]) single_arg = static_cast<int>(k);
  CHECK(ens.label == single_arg);

  double total = 0;
  for (std::size_t k = 0; k < ens.scores.size(); ++k) {
    CHECK(ens.scores[k] >= 0.0);
    CHECK(ens.scores[k] <= 5.0);
    CHECK(ens.scores[k] == doctest::Approx(5.0 * single[k]).epsilon(1e-5));
    total += ens.scores[k];
  }
  CHECK(total == doctest::Approx(5.0).epsilon(1e-4));

  // Mixed class counts across members are rejected.
  Model eight(part_spec(Feature::Jaw, 8), 3);
  std::vector<Model*> mixed = {models[0], &eight};
  CHECK_THROWS_AS(predict_ensemble(mixed, crop), std::invalid_argument);
}

TEST_CASE("predict_labels matches per-sample ensemble predictions") {
  Model a(part_spec(Feature::Eyes), 41);
  Model b(part_spec(Feature::Nose), 42);
  std::vector<Model*> models = {&a, &b};

  Rng rng(13);
  std::vector<LoadedSample> samples(3);
  for (auto& s : samples) s.image = random_crop(rng);

  const std::vector<int> labels = predict_labels(models, samples);
  REQUIRE(labels.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    CHECK(labels[i] == predict_ensemble(models, samples[i].image).label);
}

TEST_CASE("profiling reports latency and checkpoint sizes") {
  Model m(part_spec(), 55);
  std::vector<Model*> models = {&m};
  CHECK_THROWS_AS(profile_inference(models, 0), std::invalid_argument);

  const auto ckpt =
      (std::filesystem::temp_directory_path() / "profile_size.petl").string();
  save_checkpoint(m, ckpt, "");
  const ProfileReport rep = profile_inference(models, 3, {ckpt}, 1);
  REQUIRE(rep.per_model_mean_ms.size() == 1);
  CHECK(rep.per_model_mean_ms[0] > 0.0);
  CHECK(rep.per_model_median_ms[0] > 0.0);
  CHECK(rep.serial_ensemble_mean_ms > 0.0);
  // Serial ensemble of one model is that model's own latency (loose factor
  // for scheduler noise on a shared machine).
  CHECK(rep.serial_ensemble_mean_ms < 10.0 * rep.per_model_mean_ms[0]);
  REQUIRE(rep.file_sizes.size() == 1);
  CHECK(rep.file_sizes[0] ==
        static_cast<std::int64_t>(std::filesystem::file_size(ckpt)));
  std::remove(ckpt.c_str());
}

TEST_CASE("prediction records serialize label and scores") {
  const EnsemblePrediction p = sum_probabilities({{0.1f, 0.7f, 0.2f}});
  const std::vector<std::string> classes = {"Angry", "Happy", "Sad"};
  const std::string rec = prediction_record(p, classes);
  CHECK(rec.find("Happy") != std::string::npos);
  CHECK(rec.find("0.7") != std::string::npos);
}
