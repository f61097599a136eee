#pragma once

#include <stdexcept>
#include <vector>

#include "petl/image.hpp"
#include "petl/model.hpp"

namespace petl {

// Channel weights: spatial mean of the class-score gradient at the pooled
// activation, one weight per channel. dA is [1,H,W,K] or [H,W,K].
template <typename T>
std::vector<T> neuron_importance(const TensorT<T>& dA) {
  const int rank = dA.ndim();
  if (rank != 3 && rank != 4)
    throw std::invalid_argument("neuron_importance: expected rank 3 or 4, got " + dA.shape_str());
  if (rank == 4 && dA.dim(0) != 1)
    throw std::invalid_argument("neuron_importance: batch size must be 1");
  const int k = dA.dim(rank - 1);
  const std::int64_t hw = dA.size() / k;
  std::vector<T> alpha(static_cast<std::size_t>(k), T(0));
  for (std::int64_t i = 0; i < dA.size(); ++i) alpha[static_cast<std::size_t>(i % k)] += dA[i];
  for (auto& a : alpha) a /= static_cast<T>(hw);
  return alpha;
}

// ReLU of the channel-weighted activation sum: [H,W].
template <typename T>
TensorT<T> gradcam_map(const TensorT<T>& A, const std::vector<T>& alpha) {
  const int rank = A.ndim();
  if (rank != 3 && rank != 4)
    throw std::invalid_argument("gradcam_map: expected rank 3 or 4, got " + A.shape_str());
  if (rank == 4 && A.dim(0) != 1)
    throw std::invalid_argument("gradcam_map: batch size must be 1");
  const int h = A.dim(rank - 3), w = A.dim(rank - 2), k = A.dim(rank - 1);
  if (alpha.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("gradcam_map: weight count does not match channel count");
  TensorT<T> map({h, w});
  for (std::int64_t i = 0; i < map.size(); ++i) {
    T s = T(0);
    for (int c = 0; c < k; ++c) s += alpha[static_cast<std::size_t>(c)] * A[i * k + c];
    map[i] = s > T(0) ? s : T(0);
  }
  return map;
}

struct GradCamResult {
  Tensor map;                 // [10,10], non-negative, unnormalized
  std::vector<float> alpha;   // per-channel weights
  int class_index = 0;        // the class the map explains
};

// Grad-CAM at the last pre-pooling activation, in inference mode. A negative
// class index means "the predicted class".
GradCamResult gradcam(Model& model, const Tensor& crop, int class_index = -1);

// Map scaled so its maximum is 1; an all-zero map stays zero.
Tensor normalize_map(const Tensor& map);

// Element-wise maximum of the max-normalized maps.
Tensor union_maps(const std::vector<Tensor>& maps);

// Half-pixel-center bilinear upsampling of an [H,W] map.
Tensor upsample_map(const Tensor& map, int out_h, int out_w);

// Heatmap blended over the grayscale crop with a blue-green-red ramp.
RgbImage overlay_heatmap(const GrayImage& base, const Tensor& map, float alpha = 0.4f);

}  // namespace petl
