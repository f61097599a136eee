#include "petl/infer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace petl {

namespace {

Tensor as_batch(const Tensor& crop) {
  if (crop.ndim() == 4) {
    if (crop.dim(0) != 1 || crop.dim(1) != kInputSize || crop.dim(2) != kInputSize ||
        crop.dim(3) != 3)
      throw std::invalid_argument("predict: expected [1,160,160,3], got " + crop.shape_str());
    return crop;
  }
  if (crop.ndim() != 3 || crop.dim(0) != kInputSize || crop.dim(1) != kInputSize ||
      crop.dim(2) != 3)
    throw std::invalid_argument("predict: expected [160,160,3], got " + crop.shape_str());
  Tensor b({1, kInputSize, kInputSize, 3});
  b.data = crop.data;
  return b;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0 : s / static_cast<double>(v.size());
}

}  // namespace

ProbVector predict_single(Model& model, const Tensor& crop) {
  Tensor probs = model.predict_probs(as_batch(crop));
  return ProbVector(probs.data.begin(), probs.data.begin() + model.spec().num_classes);
}

EnsemblePrediction sum_probabilities(const std::vector<ProbVector>& probs) {
  if (probs.empty()) throw std::invalid_argument("ensemble: no probability vectors");
  const std::size_t k = probs.front().size();
  if (k == 0) throw std::invalid_argument("ensemble: empty probability vector");
  EnsemblePrediction out;
  out.per_model = probs;
  out.scores.assign(k, 0.0);
  for (const auto& p : probs) {
    if (p.size() != k)
      throw std::invalid_argument("ensemble: class count mismatch (" + std::to_string(p.size()) +
                                  " vs " + std::to_string(k) + ")");
    for (std::size_t c = 0; c < k; ++c) out.scores[c] += static_cast<double>(p[c]);
  }
  // Strict > keeps the lowest class index on ties.
  out.label = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (out.scores[c] > out.scores[out.label]) out.label = static_cast<int>(c);
  return out;
}

EnsemblePrediction predict_ensemble(std::vector<Model*> models, const Tensor& crop) {
  if (models.empty()) throw std::invalid_argument("ensemble: no models");
  std::vector<ProbVector> probs;
  probs.reserve(models.size());
  const Tensor batch = as_batch(crop);
  for (Model* m : models) probs.push_back(predict_single(*m, batch));
  return sum_probabilities(probs);
}

std::vector<int> predict_labels(std::vector<Model*> models,
                                const std::vector<LoadedSample>& samples) {
  if (models.empty()) throw std::invalid_argument("predict_labels: no models");
  const int num_classes = models.front()->spec().num_classes;
  for (Model* m : models)
    if (m->spec().num_classes != num_classes)
      throw std::invalid_argument("predict_labels: models disagree on class count");

  std::vector<int> labels(samples.size(), 0);
  constexpr std::size_t kChunk = 16;
  for (std::size_t lo = 0; lo < samples.size(); lo += kChunk) {
    const std::size_t hi = std::min(samples.size(), lo + kChunk);
    const int n = static_cast<int>(hi - lo);
    Tensor batch({n, kInputSize, kInputSize, 3});
    const std::int64_t stride = static_cast<std::int64_t>(kInputSize) * kInputSize * 3;
    for (int i = 0; i < n; ++i)
      std::copy(samples[lo + i].image.data.begin(), samples[lo + i].image.data.end(),
                batch.data.begin() + i * stride);
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(n),
                                          std::vector<double>(num_classes, 0.0));
    for (Model* m : models) {
      Tensor probs = m->predict_probs(batch);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < num_classes; ++c)
          sums[i][c] += static_cast<double>(probs[i * num_classes + c]);
    }
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < num_classes; ++c)
        if (sums[i][c] > sums[i][best]) best = c;
      labels[lo + i] = best;
    }
  }
  return labels;
}

ProfileReport profile_inference(std::vector<Model*> models, int n_trials,
                                const std::vector<std::string>& checkpoint_paths, int warmup) {
  if (models.empty()) throw std::invalid_argument("profile: no models");
  if (n_trials < 1) throw std::invalid_argument("profile: n_trials must be positive");

  Tensor crop({1, kInputSize, kInputSize, 3});
  Rng rng(12345);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : crop.data) v = dist(rng);

  using clock = std::chrono::steady_clock;
  ProfileReport rep;
  std::vector<std::vector<double>> per_model(models.size());
  std::vector<double> serial;

  for (int t = 0; t < warmup + n_trials; ++t) {
    double trial_total = 0;
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto t0 = clock::now();
      volatile float sink = models[m]->predict_probs(crop)[0];
      (void)sink;
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      if (t >= warmup) per_model[m].push_back(ms);
      trial_total += ms;
    }
    if (t >= warmup) serial.push_back(trial_total);
  }

  for (const auto& v : per_model) {
    rep.per_model_mean_ms.push_back(mean(v));
    rep.per_model_median_ms.push_back(median(v));
  }
  rep.serial_ensemble_mean_ms = mean(serial);
  rep.serial_ensemble_median_ms = median(serial);
  for (const auto& p : checkpoint_paths)
    rep.file_sizes.push_back(static_cast<std::int64_t>(std::filesystem::file_size(p)));
  return rep;
}

std::string prediction_record(const EnsemblePrediction& pred,
                              const std::vector<std::string>& classes) {
  if (classes.size() != pred.scores.size())
    throw std::invalid_argument("prediction_record: class list size mismatch");
  std::ostringstream os;
  os << "predicted = " << classes[static_cast<std::size_t>(pred.label)] << "\n";
  os << std::fixed << std::setprecision(6);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    os << classes[c] << " sum=" << pred.scores[c];
    for (const auto& p : pred.per_model) os << " " << p[c];
    os << "\n";
  }
  return os.str();
}

}  // namespace petl
