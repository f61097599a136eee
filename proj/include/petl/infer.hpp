#pragma once

#include <string>
#include <vector>

#include "petl/model.hpp"
#include "petl/train.hpp"

namespace petl {

using ProbVector = std::vector<float>;

// Softmax output of the classification head for one preprocessed crop
// ([160,160,3] or [1,160,160,3], values in [-1,1]); batchnorm in infer mode.
ProbVector predict_single(Model& model, const Tensor& crop);

struct EnsemblePrediction {
  int label = 0;
  std::vector<double> scores;          // per-class probability sums
  std::vector<ProbVector> per_model;
};

// Ensemble policy over raw probability vectors: 64-bit accumulation,
// argmax over the class sums, ties broken by lowest class index.
EnsemblePrediction sum_probabilities(const std::vector<ProbVector>& probs);

// Runs all models on the crop and applies the summation policy. Models must
// agree on the class count.
EnsemblePrediction predict_ensemble(std::vector<Model*> models, const Tensor& crop);

// Batched argmax predictions for a whole sample set; one model or an
// ensemble of five.
std::vector<int> predict_labels(std::vector<Model*> models,
                                const std::vector<LoadedSample>& samples);

struct ProfileReport {
  std::vector<double> per_model_mean_ms;
  std::vector<double> per_model_median_ms;
  double serial_ensemble_mean_ms = 0;
  double serial_ensemble_median_ms = 0;
  std::vector<std::int64_t> file_sizes;  // bytes per checkpoint, when paths given
};

// Wall-clock forward-pass latency, excluding image load and preprocessing;
// `warmup` initial trials are discarded.
ProfileReport profile_inference(std::vector<Model*> models, int n_trials,
                                const std::vector<std::string>& checkpoint_paths = {},
                                int warmup = 10);

std::string prediction_record(const EnsemblePrediction& pred,
                              const std::vector<std::string>& classes);

}  // namespace petl
