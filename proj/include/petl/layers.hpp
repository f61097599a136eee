#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "petl/rng.hpp"
#include "petl/tensor.hpp"

namespace petl {

template <typename T>
struct NamedTensor {
  std::string name;
  TensorT<T>* tensor;
};

// A layer owns its parameters and the activation state needed for one
// backward pass. Tensors are NHWC.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual TensorT<T> forward(const TensorT<T>& x, bool train) = 0;
  virtual TensorT<T> backward(const TensorT<T>& dy) = 0;
  // Trainable parameters.
  virtual std::vector<NamedTensor<T>> params() { return {}; }
  // Non-trainable state carried in checkpoints (batchnorm moving stats).
  virtual std::vector<NamedTensor<T>> state() { return {}; }
  virtual const char* kind() const = 0;
};

// 3x3 convolution, stride 1, same padding. Weights are [3,3,Cin,Cout] so each
// (kh,kw) tap is a contiguous [Cin,Cout] matrix. The convolution is computed
// as nine shifted GEMMs over a zero-padded copy of the input: the padding
// absorbs every out-of-frame read (contributing zeros) and the row overhang
// columns of the padded output collect junk that is simply never copied out.
// This avoids materializing the 9x-expanded im2col matrix entirely.
template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::string name, int cin, int cout, std::uint64_t seed)
      : name_(std::move(name)), cin_(cin), cout_(cout) {
    weight_ = he_uniform_init<T>({3, 3, cin, cout}, 9ll * cin, seed);
    bias_ = TensorT<T>({cout});
    weight_.requires_grad();
    bias_.requires_grad();
  }

  TensorT<T> forward(const TensorT<T>& x, bool) override {
    if (x.ndim() != 4)
      throw std::invalid_argument(name_ + ": expected rank-4 input, got " + x.shape_str());
    if (x.dim(3) != cin_)
      throw std::invalid_argument(name_ + ": shape mismatch at axis 3 (channels " +
                                  std::to_string(x.dim(3)) + " vs " + std::to_string(cin_) + ")");
    input_ = x;
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int wp = w + 2, hp = h + 2;
    // The whole batch shares one padded buffer: sample s occupies padded rows
    // [s*hp, (s+1)*hp). A tap that reads past a sample's edge lands in its
    // zero margin (or the next sample's top margin), contributing nothing.
    const std::int64_t rows = gemm_rows(n, h, w);
    pad_input(x.data.data(), n, h, w);
    TensorT<T> y({n, h, w, cout_});
    std::vector<T> ypad(static_cast<std::size_t>(rows) * cout_);
    for (int k = 0; k < 9; ++k)
      gemm(false, false, static_cast<int>(rows), cout_, cin_, T(1),
           xpad_base() + tap_offset(k, wp) * cin_, cin_,
           weight_.data.data() + static_cast<std::int64_t>(k) * cin_ * cout_, cout_,
           k == 0 ? T(0) : T(1), ypad.data(), cout_);
    // Copy the valid region out and add the bias. Output pixel (s,r,c) lives
    // at GEMM row (s*hp + r)*wp + 1 + c; everything else is junk.
    const T* b = bias_.data.data();
    for (int s = 0; s < n; ++s)
      for (int r = 0; r < h; ++r) {
        const T* src =
            ypad.data() + ((static_cast<std::int64_t>(s) * hp + r) * wp + 1) * cout_;
        T* dst = y.data.data() +
                 (static_cast<std::int64_t>(s) * h + r) * static_cast<std::int64_t>(w) * cout_;
        for (int c = 0; c < w; ++c)
          for (int ch = 0; ch < cout_; ++ch) dst[c * cout_ + ch] = src[c * cout_ + ch] + b[ch];
      }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    const int n = input_.dim(0), h = input_.dim(1), w = input_.dim(2);
    const int wp = w + 2, hp = h + 2;
    const std::int64_t rows = gemm_rows(n, h, w);
    TensorT<T> dx(input_.shape);
    // dy scattered into the padded layout; margins and junk columns stay
    // zero, so they drop out of both gradients.
    std::vector<T> dypad(static_cast<std::size_t>(rows) * cout_, T(0));
    for (int s = 0; s < n; ++s)
      for (int r = 0; r < h; ++r)
        std::copy(dy.data.data() + (static_cast<std::int64_t>(s) * h + r) *
                                       static_cast<std::int64_t>(w) * cout_,
                  dy.data.data() + (static_cast<std::int64_t>(s) * h + r + 1) *
                                       static_cast<std::int64_t>(w) * cout_,
                  dypad.data() +
                      ((static_cast<std::int64_t>(s) * hp + r) * wp + 1) * cout_);
    pad_input(input_.data.data(), n, h, w);
    std::vector<T> dxpad(xpad_.size(), T(0));
    for (int k = 0; k < 9; ++k) {
      // dW_k += xpad_k^T * dy
      gemm(true, false, cin_, cout_, static_cast<int>(rows), T(1),
           xpad_base() + tap_offset(k, wp) * cin_, cin_, dypad.data(), cout_, T(1),
           weight_.grad.data() + static_cast<std::int64_t>(k) * cin_ * cout_, cout_);
      // dxpad_k += dy * W_k^T
      gemm(false, true, static_cast<int>(rows), cin_, cout_, T(1), dypad.data(), cout_,
           weight_.data.data() + static_cast<std::int64_t>(k) * cin_ * cout_, cout_, T(1),
           dxpad.data() + (margin_ + tap_offset(k, wp)) * cin_, cin_);
    }
    // Extract the interior of dxpad and fold up the bias gradient.
    for (int s = 0; s < n; ++s)
      for (int r = 0; r < h; ++r)
        std::copy(dxpad.data() +
                      (margin_ + ((static_cast<std::int64_t>(s) * hp + r + 1) * wp + 1)) * cin_,
                  dxpad.data() +
                      (margin_ + ((static_cast<std::int64_t>(s) * hp + r + 1) * wp + 1 + w)) * cin_,
                  dx.data.data() +
                      (static_cast<std::int64_t>(s) * h + r) * static_cast<std::int64_t>(w) * cin_);
    const T* dyp = dy.data.data();
    for (std::int64_t i = 0, px = dy.size() / cout_; i < px; ++i)
      for (int c = 0; c < cout_; ++c) bias_.grad[c] += dyp[i * cout_ + c];
    return dx;
  }

  std::vector<NamedTensor<T>> params() override {
    return {{name_ + ".weight", &weight_}, {name_ + ".bias", &bias_}};
  }
  const char* kind() const override { return "conv2d"; }

  TensorT<T>& weight() { return weight_; }
  TensorT<T>& bias() { return bias_; }

 private:
  // Linear offset (in padded pixels) of tap k relative to a padded output
  // index: output pixel (r, c) in a [h, w+2] layout reads padded input pixel
  // (r + kh, c - 1 + kw) of the [h+2, w+2] buffer.
  static std::int64_t tap_offset(int k, int wp) {
    return static_cast<std::int64_t>(k / 3) * wp + (k % 3) - 1;
  }

  // One extra pixel of margin on each end keeps the k=0 tap (offset -1) and
  // the largest dxpad write window in bounds.
  T* xpad_base() { return xpad_.data() + margin_ * cin_; }

  // GEMM rows: everything up to the last sample's final interior row. The two
  // trailing margin rows never feed an output pixel, and excluding them keeps
  // the largest tap offset from reading past the buffer.
  static std::int64_t gemm_rows(int n, int h, int w) {
    return (static_cast<std::int64_t>(n) * (h + 2) - 2) * (w + 2);
  }

  void pad_input(const T* x, int n, int h, int w) {
    const int wp = w + 2, hp = h + 2;
    xpad_.assign(static_cast<std::size_t>(static_cast<std::int64_t>(n) * hp * wp + 2 * margin_) *
                     cin_,
                 T(0));
    for (int s = 0; s < n; ++s)
      for (int r = 0; r < h; ++r)
        std::copy(x + (static_cast<std::int64_t>(s) * h + r) * static_cast<std::int64_t>(w) * cin_,
                  x + (static_cast<std::int64_t>(s) * h + r + 1) * static_cast<std::int64_t>(w) *
                          cin_,
                  xpad_base() + ((static_cast<std::int64_t>(s) * hp + r + 1) * wp + 1) * cin_);
  }

  static constexpr std::int64_t margin_ = 1;
  std::string name_;
  int cin_, cout_;
  TensorT<T> weight_, bias_;
  TensorT<T> input_;
  std::vector<T> xpad_;
};

// Per-channel batch normalization over N,H,W with affine, moving statistics
// updated by exponential average in train mode.
template <typename T>
class BatchNorm : public Layer<T> {
 public:
  BatchNorm(std::string name, int channels, T momentum = T(0.99), T eps = T(1e-3))
      : name_(std::move(name)), c_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = TensorT<T>({channels});
    beta_ = TensorT<T>({channels});
    moving_mean_ = TensorT<T>({channels});
    moving_var_ = TensorT<T>({channels});
    std::fill(gamma_.data.begin(), gamma_.data.end(), T(1));
    std::fill(moving_var_.data.begin(), moving_var_.data.end(), T(1));
    gamma_.requires_grad();
    beta_.requires_grad();
  }

  TensorT<T> forward(const TensorT<T>& x, bool train) override {
    if (x.dim(x.ndim() - 1) != c_)
      throw std::invalid_argument(name_ + ": shape mismatch at channel axis (" +
                                  std::to_string(x.dim(x.ndim() - 1)) + " vs " +
                                  std::to_string(c_) + ")");
    const std::int64_t m = x.size() / c_;
    train_ = train;
    TensorT<T> y(x.shape);
    const T* xp = x.data.data();
    T* yp = y.data.data();
    if (train) {
      m_ = m;
      mean_.assign(c_, T(0));
      var_.assign(c_, T(0));
      for (std::int64_t r = 0; r < m; ++r) {
        const T* xr = xp + r * c_;
        for (int c = 0; c < c_; ++c) mean_[c] += xr[c];
      }
      for (int c = 0; c < c_; ++c) mean_[c] /= static_cast<T>(m);
      for (std::int64_t r = 0; r < m; ++r) {
        const T* xr = xp + r * c_;
        for (int c = 0; c < c_; ++c) {
          const T d = xr[c] - mean_[c];
          var_[c] += d * d;
        }
      }
      for (int c = 0; c < c_; ++c) var_[c] /= static_cast<T>(m);
      inv_std_.resize(c_);
      for (int c = 0; c < c_; ++c) inv_std_[c] = T(1) / std::sqrt(var_[c] + eps_);
      xhat_.resize(static_cast<std::size_t>(x.size()));
      T* xh = xhat_.data();
      for (std::int64_t r = 0; r < m; ++r) {
        const T* xr = xp + r * c_;
        T* yr = yp + r * c_;
        T* xhr = xh + r * c_;
        for (int c = 0; c < c_; ++c) {
          xhr[c] = (xr[c] - mean_[c]) * inv_std_[c];
          yr[c] = gamma_[c] * xhr[c] + beta_[c];
        }
      }
      for (int c = 0; c < c_; ++c) {
        moving_mean_[c] = momentum_ * moving_mean_[c] + (T(1) - momentum_) * mean_[c];
        moving_var_[c] = momentum_ * moving_var_[c] + (T(1) - momentum_) * var_[c];
      }
    } else {
      inv_std_.resize(c_);
      for (int c = 0; c < c_; ++c) inv_std_[c] = T(1) / std::sqrt(moving_var_[c] + eps_);
      xhat_.resize(static_cast<std::size_t>(x.size()));
      T* xh = xhat_.data();
      for (std::int64_t r = 0; r < m; ++r) {
        const T* xr = xp + r * c_;
        T* yr = yp + r * c_;
        T* xhr = xh + r * c_;
        for (int c = 0; c < c_; ++c) {
          xhr[c] = (xr[c] - moving_mean_[c]) * inv_std_[c];
          yr[c] = gamma_[c] * xhr[c] + beta_[c];
        }
      }
    }
    return y;
  }

  // The moving-average horizon is adjustable so a statistics-recalibration
  // sweep can turn the exponential average into an exact running mean.
  void set_momentum(T m) { momentum_ = m; }
  T momentum() const { return momentum_; }

  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx(dy.shape);
    const std::int64_t m = dy.size() / c_;
    const T* dyp = dy.data.data();
    T* dxp = dx.data.data();
    if (!train_) {
      // Moving stats are constants in infer mode: a per-channel affine map.
      const T* xh = xhat_.data();
      for (std::int64_t r = 0; r < m; ++r) {
        const T* dr = dyp + r * c_;
        const T* xhr = xh + r * c_;
        T* xr = dxp + r * c_;
        for (int c = 0; c < c_; ++c) {
          beta_.grad[c] += dr[c];
          gamma_.grad[c] += dr[c] * xhr[c];
          xr[c] = dr[c] * gamma_[c] * inv_std_[c];
        }
      }
      return dx;
    }
    std::vector<T> sum_dy(c_, T(0)), sum_dy_xhat(c_, T(0));
    const T* xh = xhat_.data();
    for (std::int64_t r = 0; r < m; ++r) {
      const T* dr = dyp + r * c_;
      const T* xhr = xh + r * c_;
      for (int c = 0; c < c_; ++c) {
        sum_dy[c] += dr[c];
        sum_dy_xhat[c] += dr[c] * xhr[c];
      }
    }
    for (int c = 0; c < c_; ++c) {
      beta_.grad[c] += sum_dy[c];
      gamma_.grad[c] += sum_dy_xhat[c];
    }
    const T inv_m = T(1) / static_cast<T>(m_);
    for (std::int64_t r = 0; r < m; ++r) {
      const T* dr = dyp + r * c_;
      const T* xhr = xh + r * c_;
      T* xr = dxp + r * c_;
      for (int c = 0; c < c_; ++c)
        xr[c] = gamma_[c] * inv_std_[c] *
                (dr[c] - sum_dy[c] * inv_m - xhr[c] * sum_dy_xhat[c] * inv_m);
    }
    return dx;
  }

  std::vector<NamedTensor<T>> params() override {
    return {{name_ + ".gamma", &gamma_}, {name_ + ".beta", &beta_}};
  }
  std::vector<NamedTensor<T>> state() override {
    return {{name_ + ".moving_mean", &moving_mean_}, {name_ + ".moving_var", &moving_var_}};
  }
  const char* kind() const override { return "batchnorm"; }

  TensorT<T>& gamma() { return gamma_; }
  TensorT<T>& beta() { return beta_; }
  TensorT<T>& moving_mean() { return moving_mean_; }
  TensorT<T>& moving_var() { return moving_var_; }

 private:
  std::string name_;
  int c_;
  T momentum_, eps_;
  TensorT<T> gamma_, beta_, moving_mean_, moving_var_;
  bool train_ = false;
  std::int64_t m_ = 0;
  std::vector<T> mean_, var_, inv_std_, xhat_;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  TensorT<T> forward(const TensorT<T>& x, bool) override {
    mask_.resize(static_cast<std::size_t>(x.size()));
    TensorT<T> y(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const bool pos = x[i] > T(0);
      y[i] = pos ? x[i] : T(0);
      mask_[static_cast<std::size_t>(i)] = pos;
    }
    return y;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx(dy.shape);
    for (std::int64_t i = 0; i < dy.size(); ++i)
      dx[i] = mask_[static_cast<std::size_t>(i)] ? dy[i] : T(0);
    return dx;
  }
  const char* kind() const override { return "relu"; }

 private:
  std::vector<std::uint8_t> mask_;
};

template <typename T>
class Sigmoid : public Layer<T> {
 public:
  TensorT<T> forward(const TensorT<T>& x, bool) override {
    out_ = TensorT<T>(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) out_[i] = T(1) / (T(1) + std::exp(-x[i]));
    return out_;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx(dy.shape);
    for (std::int64_t i = 0; i < dy.size(); ++i)
      dx[i] = dy[i] * out_[i] * (T(1) - out_[i]);
    return dx;
  }
  const char* kind() const override { return "sigmoid"; }

 private:
  TensorT<T> out_;
};

// 2x2 max pooling, stride 2. Spatial dims must be even.
template <typename T>
class MaxPool2d : public Layer<T> {
 public:
  TensorT<T> forward(const TensorT<T>& x, bool) override {
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h % 2 || w % 2)
      throw std::invalid_argument("maxpool2d: odd spatial dimension " + x.shape_str());
    in_shape_ = x.shape;
    TensorT<T> y({n, h / 2, w / 2, c});
    argmax_.resize(static_cast<std::size_t>(y.size()));
    std::int64_t o = 0;
    for (int s = 0; s < n; ++s)
      for (int r = 0; r < h; r += 2)
        for (int col = 0; col < w; col += 2)
          for (int ch = 0; ch < c; ++ch, ++o) {
            std::int64_t best = ((static_cast<std::int64_t>(s) * h + r) * w + col) * c + ch;
            T bv = x[best];
            const std::int64_t cand[3] = {best + c, best + static_cast<std::int64_t>(w) * c,
                                          best + static_cast<std::int64_t>(w) * c + c};
            for (std::int64_t idx : cand)
              if (x[idx] > bv) {
                bv = x[idx];
                best = idx;
              }
            y[o] = bv;
            argmax_[static_cast<std::size_t>(o)] = best;
          }
    return y;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx(in_shape_);
    for (std::int64_t i = 0; i < dy.size(); ++i)
      dx[argmax_[static_cast<std::size_t>(i)]] += dy[i];
    return dx;
  }
  const char* kind() const override { return "maxpool2d"; }

 private:
  std::vector<int> in_shape_;
  std::vector<std::int64_t> argmax_;
};

// [N,H,W,C] -> [N,C].
template <typename T>
class GlobalAvgPool : public Layer<T> {
 public:
  TensorT<T> forward(const TensorT<T>& x, bool) override {
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    in_shape_ = x.shape;
    TensorT<T> y({n, c});
    const T inv = T(1) / static_cast<T>(h * w);
    for (int s = 0; s < n; ++s) {
      const T* xs = x.data.data() + static_cast<std::int64_t>(s) * h * w * c;
      T* ys = y.data.data() + static_cast<std::int64_t>(s) * c;
      for (std::int64_t r = 0, rows = static_cast<std::int64_t>(h) * w; r < rows; ++r)
        for (int ch = 0; ch < c; ++ch) ys[ch] += xs[r * c + ch] * inv;
    }
    return y;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    const int n = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3];
    TensorT<T> dx(in_shape_);
    const T inv = T(1) / static_cast<T>(h * w);
    for (int s = 0; s < n; ++s) {
      const T* ds = dy.data.data() + static_cast<std::int64_t>(s) * c;
      T* xs = dx.data.data() + static_cast<std::int64_t>(s) * h * w * c;
      for (std::int64_t r = 0, rows = static_cast<std::int64_t>(h) * w; r < rows; ++r)
        for (int ch = 0; ch < c; ++ch) xs[r * c + ch] = ds[ch] * inv;
    }
    return dx;
  }
  const char* kind() const override { return "global_avg_pool"; }

 private:
  std::vector<int> in_shape_;
};

// Fully connected [N,D] -> [N,K].
template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(std::string name, int in, int out, std::uint64_t seed)
      : name_(std::move(name)), in_(in), out_(out) {
    weight_ = glorot_uniform_init<T>({in, out}, in, out, seed);
    bias_ = TensorT<T>({out});
    weight_.requires_grad();
    bias_.requires_grad();
  }

  TensorT<T> forward(const TensorT<T>& x, bool) override {
    if (x.ndim() != 2 || x.dim(1) != in_)
      throw std::invalid_argument(name_ + ": shape mismatch at axis 1, got " + x.shape_str() +
                                  " expected [N," + std::to_string(in_) + "]");
    input_ = x;
    const int n = x.dim(0);
    TensorT<T> y({n, out_});
    gemm(false, false, n, out_, in_, T(1), x.data.data(), in_, weight_.data.data(), out_,
         T(0), y.data.data(), out_);
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] += bias_[i % out_];
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    const int n = input_.dim(0);
    gemm(true, false, in_, out_, n, T(1), input_.data.data(), in_, dy.data.data(), out_,
         T(1), weight_.grad.data(), out_);
    for (std::int64_t i = 0; i < dy.size(); ++i) bias_.grad[i % out_] += dy[i];
    TensorT<T> dx({n, in_});
    gemm(false, true, n, in_, out_, T(1), dy.data.data(), out_, weight_.data.data(), out_,
         T(0), dx.data.data(), in_);
    return dx;
  }

  std::vector<NamedTensor<T>> params() override {
    return {{name_ + ".weight", &weight_}, {name_ + ".bias", &bias_}};
  }
  const char* kind() const override { return "dense"; }

  TensorT<T>& weight() { return weight_; }
  TensorT<T>& bias() { return bias_; }

 private:
  std::string name_;
  int in_, out_;
  TensorT<T> weight_, bias_;
  TensorT<T> input_;
};

// A plain sequential stack.
template <typename T>
class Stack {
 public:
  void add(std::unique_ptr<Layer<T>> l) { layers_.push_back(std::move(l)); }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    TensorT<T> y = x;
    for (auto& l : layers_) y = l->forward(y, train);
    return y;
  }
  TensorT<T> backward(const TensorT<T>& dy) {
    TensorT<T> g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  std::vector<NamedTensor<T>> params() {
    std::vector<NamedTensor<T>> out;
    for (auto& l : layers_)
      for (auto& p : l->params()) out.push_back(p);
    return out;
  }
  std::vector<NamedTensor<T>> state() {
    std::vector<NamedTensor<T>> out;
    for (auto& l : layers_)
      for (auto& p : l->state()) out.push_back(p);
    return out;
  }
  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace petl
