#ifndef SUBNORM_TENSOR_HPP
#define SUBNORM_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "subnorm/errors.hpp"

namespace subnorm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;  // column-major
using Vector = Eigen::VectorXd;
using Shape = std::vector<Index>;

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

// Dense K-way array of doubles stored in colexicographic order: the first
// index varies fastest. Modes are 0-based throughout the library.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0);
  }

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (static_cast<Index>(data_.size()) != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  Index order() const { return static_cast<Index>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  Index dim(Index k) const {
    check_mode(k);
    return shape_[static_cast<std::size_t>(k)];
  }
  Index size() const { return static_cast<Index>(data_.size()); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }

  // Flat offset of a multi-index.
  Index offset(std::span<const Index> idx) const {
    if (static_cast<Index>(idx.size()) != order()) throw ShapeError("multi-index has wrong order");
    Index off = 0;
    Index stride = 1;
    for (std::size_t l = 0; l < shape_.size(); ++l) {
      off += idx[l] * stride;
      stride *= shape_[l];
    }
    return off;
  }

  double operator()(std::initializer_list<Index> idx) const {
    return data_[static_cast<std::size_t>(offset(std::span<const Index>(idx.begin(), idx.size())))];
  }
  double& operator()(std::initializer_list<Index> idx) {
    return data_[static_cast<std::size_t>(offset(std::span<const Index>(idx.begin(), idx.size())))];
  }

  // Column vector view over the storage (no copy).
  Eigen::Map<const Vector> vec() const { return {data_.data(), size()}; }
  Eigen::Map<Vector> vec() { return {data_.data(), size()}; }

  void check_mode(Index k) const {
    if (k < 0 || k >= order()) {
      throw ModeError("mode " + std::to_string(k) + " out of range for order-" +
                      std::to_string(order()) + " tensor");
    }
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o);
    vec() += o.vec();
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o);
    vec() -= o.vec();
    return *this;
  }
  Tensor& operator*=(double a) {
    vec() *= a;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  void require_same_shape(const Tensor& o) const {
    if (shape_ != o.shape_) {
      throw ShapeError("shape mismatch: " + shape_string(shape_) + " vs " + shape_string(o.shape_));
    }
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor must have at least one mode");
    for (Index n : shape_) {
      if (n < 1) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

namespace detail {

// Splits the index space around mode k into (left, n_k, right) blocks:
// entry (a, i, b) lives at a + left * (i + n_k * b).
struct ModeSplit {
  Index left = 1;
  Index mid = 1;
  Index right = 1;
};

inline ModeSplit split_at(const Shape& shape, Index k) {
  ModeSplit s;
  for (Index l = 0; l < k; ++l) s.left *= shape[static_cast<std::size_t>(l)];
  s.mid = shape[static_cast<std::size_t>(k)];
  for (Index l = k + 1; l < static_cast<Index>(shape.size()); ++l) s.right *= shape[static_cast<std::size_t>(l)];
  return s;
}

}  // namespace detail

/// Mode-k unfolding: n_k x prod_{l != k} n_l. The fiber at multi-index
/// (i_l)_{l != k} sits in column sum_{l != k} i_l * prod_{m < l, m != k} n_m.
inline Matrix unfold(const Tensor& X, Index k) {
  X.check_mode(k);
  const auto s = detail::split_at(X.shape(), k);
  Matrix out(s.mid, s.left * s.right);
  const auto data = X.data();
  for (Index b = 0; b < s.right; ++b) {
    for (Index i = 0; i < s.mid; ++i) {
      const double* src = data.data() + s.left * (i + s.mid * b);
      for (Index a = 0; a < s.left; ++a) out(i, a + s.left * b) = src[a];
    }
  }
  return out;
}

/// Inverse of unfold for the given target shape.
inline Tensor fold(const Matrix& M, Index k, const Shape& shape) {
  Tensor out(shape);
  out.check_mode(k);
  const auto s = detail::split_at(shape, k);
  if (M.rows() != s.mid || M.cols() != s.left * s.right) {
    throw ShapeError("cannot fold " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                     " matrix at mode " + std::to_string(k) + " into shape " + shape_string(shape));
  }
  auto data = out.data();
  for (Index b = 0; b < s.right; ++b) {
    for (Index i = 0; i < s.mid; ++i) {
      double* dst = data.data() + s.left * (i + s.mid * b);
      for (Index a = 0; a < s.left; ++a) dst[a] = M(i, a + s.left * b);
    }
  }
  return out;
}

inline Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index j = 0; j < A.cols(); ++j) {
    for (Index i = 0; i < A.rows(); ++i) {
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return out;
}

// Left-to-right product A_0 (x) A_1 (x) ... (x) A_{L-1}.
inline Matrix kron_list(std::span<const Matrix> factors) {
  if (factors.empty()) return Matrix::Ones(1, 1);
  Matrix out = factors[0];
  for (std::size_t i = 1; i < factors.size(); ++i) out = kron(out, factors[i]);
  return out;
}

/// Kronecker product of all factors except mode k, ordered to match unfold():
/// modes ascend with the fastest-varying one rightmost, i.e.
/// A_{K-1} (x) ... (x) A_{k+1} (x) A_{k-1} (x) ... (x) A_0.
/// With this ordering unfold(core x_1 A_0 ... x_K A_{K-1}, k)
///   == A_k * unfold(core, k) * kron_except(A, k)^T.
inline Matrix kron_except(std::span<const Matrix> factors, Index k) {
  Matrix out = Matrix::Ones(1, 1);
  for (Index l = static_cast<Index>(factors.size()) - 1; l >= 0; --l) {
    if (l == k) continue;
    out = kron(out, factors[static_cast<std::size_t>(l)]);
  }
  return out;
}

inline double inner(const Tensor& X, const Tensor& Y) {
  X.require_same_shape(Y);
  return X.vec().dot(Y.vec());
}

inline double fro_norm(const Tensor& X) { return X.vec().norm(); }

/// Mode-k product: unfold(result, k) = A * unfold(X, k).
/// Works slab by slab on the storage; no unfolding is materialized.
inline Tensor mode_product(const Tensor& X, const Matrix& A, Index k) {
  X.check_mode(k);
  if (A.cols() != X.dim(k)) {
    throw ShapeError("mode product: matrix has " + std::to_string(A.cols()) +
                     " columns, tensor mode " + std::to_string(k) + " has size " +
                     std::to_string(X.dim(k)));
  }
  Shape shape = X.shape();
  shape[static_cast<std::size_t>(k)] = A.rows();
  Tensor out(shape);
  const auto s = detail::split_at(X.shape(), k);
  const double* src = X.data().data();
  double* dst = out.data().data();
  if (s.left == 1) {
    Eigen::Map<Matrix>(dst, A.rows(), s.right).noalias() = A * Eigen::Map<const Matrix>(src, s.mid, s.right);
    return out;
  }
  for (Index b = 0; b < s.right; ++b) {
    Eigen::Map<Matrix>(dst + b * s.left * A.rows(), s.left, A.rows()).noalias() =
        Eigen::Map<const Matrix>(src + b * s.left * s.mid, s.left, s.mid) * A.transpose();
  }
  return out;
}

/// core x_0 factors[0] x_1 ... x_{K-1} factors[K-1].
inline Tensor tucker_compose(const Tensor& core, std::span<const Matrix> factors) {
  if (static_cast<Index>(factors.size()) != core.order()) {
    throw ShapeError("tucker_compose: need one factor per core mode");
  }
  Tensor out = core;
  for (Index k = 0; k < core.order(); ++k) {
    const Matrix& U = factors[static_cast<std::size_t>(k)];
    if (U.cols() != core.dim(k)) {
      throw ShapeError("tucker_compose: factor " + std::to_string(k) + " has " +
                       std::to_string(U.cols()) + " columns, core has " +
                       std::to_string(core.dim(k)));
    }
    out = mode_product(out, U, k);
  }
  return out;
}

/// Rank-one tensor v_0 o v_1 o ... o v_{K-1}.
inline Tensor outer(std::span<const Vector> vectors) {
  Shape shape;
  for (const auto& v : vectors) shape.push_back(v.size());
  Tensor out(shape);
  std::vector<Index> idx(vectors.size(), 0);
  for (Index flat = 0; flat < out.size(); ++flat) {
    double value = 1.0;
    for (std::size_t l = 0; l < vectors.size(); ++l) value *= vectors[l](idx[l]);
    out[flat] = value;
    for (std::size_t l = 0; l < idx.size(); ++l) {
      if (++idx[l] < shape[l]) break;
      idx[l] = 0;
    }
  }
  return out;
}

}  // namespace subnorm

#endif  // SUBNORM_TENSOR_HPP
