#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <cblas.h>

namespace petl {

// Dense n-dimensional array, row-major, with an optional gradient slot of
// the same shape. Scalar type is float in production; double is used for
// gradient checking.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty unless requires_grad() was called

  TensorT() = default;

  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(count(shape), T(0));
  }

  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != count(shape))
      throw std::invalid_argument("tensor: data length does not match shape");
  }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(shape.size()); }

  void requires_grad() { grad.assign(data.size(), T(0)); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
  }
};

using Tensor = TensorT<float>;

inline void check_same_shape(const std::vector<int>& a, const std::vector<int>& b,
                             const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": shape mismatch";
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
      int da = i < a.size() ? a[i] : -1;
      int db = i < b.size() ? b[i] : -1;
      if (da != db) {
        os << " at axis " << i << " (" << da << " vs " << db << ")";
        break;
      }
    }
    throw std::invalid_argument(os.str());
  }
}

// Row-major C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta, float* c,
                 int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta,
              c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb, double beta,
                 double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta,
              c, ldc);
}

}  // namespace petl
