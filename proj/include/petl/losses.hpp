#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "petl/tensor.hpp"

namespace petl {

// Row-wise stabilized softmax over [N,K].
template <typename T>
TensorT<T> softmax(const TensorT<T>& logits) {
  if (logits.ndim() != 2 || logits.dim(1) < 2)
    throw std::invalid_argument("softmax: expected [N,K] with K >= 2, got " + logits.shape_str());
  const int n = logits.dim(0), k = logits.dim(1);
  TensorT<T> out(logits.shape);
  for (int r = 0; r < n; ++r) {
    const T* row = logits.data.data() + static_cast<std::int64_t>(r) * k;
    T* orow = out.data.data() + static_cast<std::int64_t>(r) * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < k; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < k; ++j) orow[j] /= sum;
  }
  return out;
}

// Mean absolute error over all entries; subgradient at zero is zero.
template <typename T>
struct L1Result {
  T loss;
  TensorT<T> grad;  // d loss / d pred
};

template <typename T>
L1Result<T> l1_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  check_same_shape(pred.shape, target.shape, "l1_loss");
  L1Result<T> r{T(0), TensorT<T>(pred.shape)};
  const T inv = T(1) / static_cast<T>(pred.size());
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    r.loss += std::abs(d) * inv;
    r.grad[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
  }
  return r;
}

// Mean of -log p[label] over the batch, on already-softmaxed rows.
template <typename T>
T cross_entropy_loss(const TensorT<T>& probs, const std::vector<int>& labels) {
  const int n = probs.dim(0), c = probs.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy_loss: label count does not match batch");
  T loss = T(0);
  for (int r = 0; r < n; ++r) {
    if (labels[r] < 0 || labels[r] >= c)
      throw std::out_of_range("cross_entropy_loss: label " + std::to_string(labels[r]) +
                              " out of range for " + std::to_string(c) + " classes");
    loss -= std::log(probs[static_cast<std::int64_t>(r) * c + labels[r]]);
  }
  return loss / static_cast<T>(n);
}

// Combined softmax + cross-entropy: backward is (probs - onehot)/N, which
// avoids the cancellation of differentiating the two separately.
template <typename T>
struct XentResult {
  T loss;
  TensorT<T> probs;
  TensorT<T> dlogits;
};

template <typename T>
XentResult<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
  XentResult<T> r;
  r.probs = softmax(logits);
  r.loss = cross_entropy_loss(r.probs, labels);
  const int n = logits.dim(0), c = logits.dim(1);
  r.dlogits = r.probs;
  const T inv = T(1) / static_cast<T>(n);
  for (int row = 0; row < n; ++row) {
    for (int j = 0; j < c; ++j) r.dlogits[static_cast<std::int64_t>(row) * c + j] *= inv;
    r.dlogits[static_cast<std::int64_t>(row) * c + labels[row]] -= inv;
  }
  return r;
}

}  // namespace petl
