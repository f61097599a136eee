#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "petl/layers.hpp"
#include "petl/losses.hpp"
#include "petl/tensor.hpp"

namespace petl {

enum class NetKind { Baseline, FullTransfer, Part };

enum class Feature { Eyebrows, Eyes, Nose, Mouth, Jaw };

inline const char* feature_name(Feature f) {
  switch (f) {
    case Feature::Eyebrows: return "eyebrows";
    case Feature::Eyes: return "eyes";
    case Feature::Nose: return "nose";
    case Feature::Mouth: return "mouth";
    case Feature::Jaw: return "jaw";
  }
  return "?";
}

inline Feature feature_from_name(const std::string& s) {
  for (Feature f : {Feature::Eyebrows, Feature::Eyes, Feature::Nose, Feature::Mouth,
                    Feature::Jaw})
    if (s == feature_name(f)) return f;
  throw std::invalid_argument("unknown facial feature: " + s);
}

constexpr std::array<Feature, 5> kAllFeatures = {Feature::Eyebrows, Feature::Eyes,
                                                 Feature::Nose, Feature::Mouth,
                                                 Feature::Jaw};

// 68-point scheme: jaw 0-16, eyebrows 17-26, nose 27-35, eyes 36-47,
// mouth 48-67.
inline std::vector<int> partition_indices(Feature f) {
  auto range = [](int lo, int hi) {
    std::vector<int> v;
    for (int i = lo; i <= hi; ++i) v.push_back(i);
    return v;
  };
  switch (f) {
    case Feature::Jaw: return range(0, 16);
    case Feature::Eyebrows: return range(17, 26);
    case Feature::Nose: return range(27, 35);
    case Feature::Eyes: return range(36, 47);
    case Feature::Mouth: return range(48, 67);
  }
  throw std::invalid_argument("partition_indices: unknown feature");
}

struct NetworkSpec {
  NetKind kind = NetKind::Baseline;
  Feature feature = Feature::Eyebrows;  // meaningful only for Part
  int num_classes = 7;

  // Landmark output width: 2 coordinates per point; 0 for the baseline.
  int landmark_outputs() const {
    switch (kind) {
      case NetKind::Baseline: return 0;
      case NetKind::FullTransfer: return 136;
      case NetKind::Part: return 2 * static_cast<int>(partition_indices(feature).size());
    }
    return 0;
  }

  std::string kind_str() const {
    switch (kind) {
      case NetKind::Baseline: return "baseline";
      case NetKind::FullTransfer: return "full_transfer";
      case NetKind::Part: return std::string("part:") + feature_name(feature);
    }
    return "?";
  }
};

constexpr int kInputSize = 160;
constexpr int kFeatureDim = 128;
constexpr std::array<int, 4> kBlockWidths = {16, 32, 64, 128};
constexpr float kBatchNormMomentum = 0.99f;
constexpr float kBatchNormEpsilon = 1e-3f;

// One FER network: shared feature extractor plus the heads its kind calls
// for. Layer seeds are derived from the base seed so construction is
// deterministic.
template <typename T>
class ModelT {
 public:
  ModelT(NetworkSpec spec, std::uint64_t seed) : spec_(spec) {
    std::uint64_t s = seed;
    auto next = [&s] { return s += 0x9e3779b97f4a7c15ull; };

    int cin = 3;
    for (std::size_t b = 0; b < kBlockWidths.size(); ++b) {
      const int cout = kBlockWidths[b];
      const std::string base = "extractor.block" + std::to_string(b + 1);
      extractor_.add(std::make_unique<Conv2d<T>>(base + ".conv1", cin, cout, next()));
      extractor_.add(std::make_unique<BatchNorm<T>>(base + ".bn1", cout,
                                                    T(kBatchNormMomentum), T(kBatchNormEpsilon)));
      extractor_.add(std::make_unique<ReLU<T>>());
      extractor_.add(std::make_unique<Conv2d<T>>(base + ".conv2", cout, cout, next()));
      extractor_.add(std::make_unique<BatchNorm<T>>(base + ".bn2", cout,
                                                    T(kBatchNormMomentum), T(kBatchNormEpsilon)));
      extractor_.add(std::make_unique<ReLU<T>>());
      extractor_.add(std::make_unique<MaxPool2d<T>>());
      cin = cout;
    }
    extractor_.add(std::make_unique<GlobalAvgPool<T>>());

    const int z = spec_.landmark_outputs();
    if (z > 0) {
      loc_head_.add(std::make_unique<Dense<T>>("loc.dense1", kFeatureDim, kFeatureDim, next()));
      loc_head_.add(std::make_unique<ReLU<T>>());
      loc_head_.add(std::make_unique<Dense<T>>("loc.dense2", kFeatureDim, z, next()));
      loc_head_.add(std::make_unique<Sigmoid<T>>());
    }

    if (spec_.num_classes != 7 && spec_.num_classes != 8)
      throw std::invalid_argument("NetworkSpec: num_classes must be 7 or 8");
    cls_head_.add(std::make_unique<Dense<T>>("cls.dense1", kFeatureDim, kFeatureDim, next()));
    cls_head_.add(std::make_unique<ReLU<T>>());
    cls_head_.add(std::make_unique<Dense<T>>("cls.dense2", kFeatureDim, kFeatureDim, next()));
    cls_head_.add(std::make_unique<ReLU<T>>());
    cls_head_.add(std::make_unique<Dense<T>>("cls.dense3", kFeatureDim, spec_.num_classes,
                                             next()));
  }

  const NetworkSpec& spec() const { return spec_; }

  Stack<T>& extractor() { return extractor_; }
  Stack<T>& loc_head() { return loc_head_; }
  Stack<T>& cls_head() { return cls_head_; }

  // [N,160,160,3] -> 128-D features.
  TensorT<T> features(const TensorT<T>& x, bool train) {
    return extractor_.forward(x, train);
  }

  // [N,160,160,3] -> landmark predictions in [0,1].
  TensorT<T> predict_landmarks(const TensorT<T>& x, bool train) {
    if (spec_.landmark_outputs() == 0)
      throw std::logic_error("baseline network has no localization head");
    return loc_head_.forward(features(x, train), train);
  }

  // [N,160,160,3] -> pre-softmax class scores.
  TensorT<T> logits(const TensorT<T>& x, bool train) {
    return cls_head_.forward(features(x, train), train);
  }

  TensorT<T> predict_probs(const TensorT<T>& x) { return softmax(logits(x, false)); }

  // Named trainable parameters plus batchnorm moving statistics; the order
  // defines the checkpoint payload order.
  std::vector<NamedTensor<T>> named_tensors() {
    std::vector<NamedTensor<T>> out;
    for (auto& p : extractor_.params()) out.push_back(p);
    for (auto& p : extractor_.state()) out.push_back(p);
    for (auto& p : loc_head_.params()) out.push_back(p);
    for (auto& p : cls_head_.params()) out.push_back(p);
    return out;
  }

  struct ParamBreakdown {
    std::int64_t extractor = 0;
    std::int64_t loc_head = 0;
    std::int64_t cls_head = 0;
    std::int64_t total() const { return extractor + loc_head + cls_head; }
  };

  // Includes batchnorm moving statistics, which the checkpoint also stores.
  ParamBreakdown count_params() {
    ParamBreakdown b;
    for (auto& p : extractor_.params()) b.extractor += p.tensor->size();
    for (auto& p : extractor_.state()) b.extractor += p.tensor->size();
    for (auto& p : loc_head_.params()) b.loc_head += p.tensor->size();
    for (auto& p : cls_head_.params()) b.cls_head += p.tensor->size();
    return b;
  }

  struct FlopCounts {
    // 2 * in * out per dense layer of the classification head.
    std::int64_t heads_only = 0;
    // Convolutions (2 * H*W * 9*Cin*Cout) plus every dense layer.
    std::int64_t full_network = 0;
  };

  FlopCounts count_flops() {
    FlopCounts f;
    int cin = 3, sz = kInputSize;
    for (int cout : kBlockWidths) {
      f.full_network += 2ll * sz * sz * 9 * cin * cout;
      f.full_network += 2ll * sz * sz * 9 * cout * cout;
      cin = cout;
      sz /= 2;
    }
    const int z = spec_.landmark_outputs();
    if (z > 0)
      f.full_network += 2ll * kFeatureDim * kFeatureDim + 2ll * kFeatureDim * z;
    f.heads_only = 2ll * kFeatureDim * kFeatureDim * 2 + 2ll * kFeatureDim * spec_.num_classes;
    f.full_network += f.heads_only;
    return f;
  }

 private:
  NetworkSpec spec_;
  Stack<T> extractor_;
  Stack<T> loc_head_;
  Stack<T> cls_head_;
};

using Model = ModelT<float>;

}  // namespace petl
