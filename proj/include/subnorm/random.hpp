#ifndef SUBNORM_RANDOM_HPP
#define SUBNORM_RANDOM_HPP

#include <cstdint>
#include <initializer_list>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "subnorm/tensor.hpp"

namespace subnorm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the substream addressed by `path` (e.g. {grid index, trial}).
/// Fixed hashing, so a stream depends only on (master, path).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = master;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t p : path) {
    state = out ^ (p + 0x632be59bd9b4e019ULL);
    out = splitmix64(state);
  }
  return out;
}

// Seeded 64-bit Mersenne twister with Boost's ziggurat normal sampler; both
// are fully specified, so streams are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }

  Matrix gaussian_matrix(Index rows, Index cols) {
    Matrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) out(i, j) = gaussian();
    return out;
  }

  Vector unit_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = gaussian();
    return v.normalized();
  }

  Tensor gaussian_tensor(const Shape& shape) {
    Tensor out(shape);
    for (double& x : out.data()) x = gaussian();
    return out;
  }

  /// Haar-distributed n x r matrix with orthonormal columns (QR of a Gaussian
  /// matrix with the diagonal of R made positive).
  Matrix orthonormal(Index n, Index r) {
    const Matrix G = gaussian_matrix(n, r);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ() * Matrix::Identity(n, r);
    const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    for (Index j = 0; j < r; ++j)
      if (R(j, j) < 0) Q.col(j) = -Q.col(j);
    return Q;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  boost::random::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace subnorm

#endif  // SUBNORM_RANDOM_HPP
