#ifndef SUBNORM_SPECTRAL_HPP
#define SUBNORM_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "subnorm/errors.hpp"
#include "subnorm/tensor.hpp"

namespace subnorm {

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // column r pairs with values(r)
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Stops once the
/// off-diagonal Frobenius mass drops to rel_tol * ||A||_F. Eigenpairs come
/// back sorted by descending value; equal values keep their original order.
inline SymmetricEigen jacobi_eigen(Matrix A, double rel_tol = 1e-12, int max_sweeps = 100) {
  if (A.rows() != A.cols()) throw ShapeError("jacobi_eigen: matrix must be square");
  const Index n = A.rows();
  Matrix V = Matrix::Identity(n, n);
  const double fro = A.norm();
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index q = 0; q < n; ++q)
      for (Index p = 0; p < n; ++p)
        if (p != q) off += A(p, q) * A(p, q);
    if (std::sqrt(off) <= rel_tol * fro) break;

    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // Rotate columns p and q (contiguous), mirror them into the rows and
        // set the 2x2 pivot block in closed form.
        const double app = A(p, p), aqq = A(q, q);
        double* ap = A.col(p).data();
        double* aq = A.col(q).data();
        for (Index k = 0; k < n; ++k) {
          const double akp = ap[k], akq = aq[k];
          ap[k] = c * akp - s * akq;
          aq[k] = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          A(p, k) = ap[k];
          A(q, k) = aq[k];
        }
        A(p, p) = app - t * apq;
        A(q, q) = aqq + t * apq;
        A(p, q) = 0.0;
        A(q, p) = 0.0;
        double* vp = V.col(p).data();
        double* vq = V.col(q).data();
        for (Index k = 0; k < n; ++k) {
          const double vkp = vp[k], vkq = vq[k];
          vp[k] = c * vkp - s * vkq;
          vq[k] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&A](Index a, Index b) { return A(a, a) > A(b, b); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index r = 0; r < n; ++r) {
    out.values(r) = A(order[static_cast<std::size_t>(r)], order[static_cast<std::size_t>(r)]);
    out.vectors.col(r) = V.col(order[static_cast<std::size_t>(r)]);
  }
  out.sweeps = sweep;
  return out;
}

namespace detail {

inline void require_finite(const Matrix& M, const char* who) {
  if (!M.allFinite()) throw ParameterError(std::string(who) + ": non-finite input");
}

// Largest-magnitude entry of every column made positive; ties go to the lowest row.
inline void fix_signs(Matrix& U) {
  for (Index j = 0; j < U.cols(); ++j) {
    Index best = 0;
    for (Index i = 1; i < U.rows(); ++i)
      if (std::abs(U(i, j)) > std::abs(U(best, j))) best = i;
    if (U(best, j) < 0) U.col(j) = -U.col(j);
  }
}

// Modified Gram-Schmidt (two passes) on the leading `keep` columns of Q, then
// fills the remaining columns with an orthonormal complement drawn from the
// standard basis.
inline Matrix orthonormalize_and_complete(Matrix Q, Index keep) {
  const Index n = Q.rows();
  const Index total = Q.cols();
  Matrix out(n, total);
  Index filled = 0;
  auto try_add = [&](Vector v) {
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < filled; ++j) v -= out.col(j).dot(v) * out.col(j);
    const double nv = v.norm();
    if (nv < 1e-10) return false;
    out.col(filled++) = v / nv;
    return true;
  };
  for (Index j = 0; j < keep && filled < total; ++j) try_add(Q.col(j));
  for (Index e = 0; e < n && filled < total; ++e) try_add(Vector::Unit(n, e));
  return out;
}

}  // namespace detail

struct TruncatedSVD {
  Matrix left_vectors;    // n x H, orthonormal columns
  Vector singular_values; // H, non-increasing
};

/// Top-H left singular subspace of M through the n x n Gram matrix M M^T.
/// Each column's largest-magnitude entry is positive.
inline TruncatedSVD top_left_singular(const Matrix& M, Index H) {
  if (H < 1 || H > std::min(M.rows(), M.cols())) {
    throw ParameterError("top_left_singular: H=" + std::to_string(H) + " outside [1, " +
                         std::to_string(std::min(M.rows(), M.cols())) + "]");
  }
  detail::require_finite(M, "top_left_singular");
  const Matrix gram = M * M.transpose();
  const auto eig = jacobi_eigen(gram);
  TruncatedSVD out;
  out.left_vectors = eig.vectors.leftCols(H);
  detail::fix_signs(out.left_vectors);
  out.singular_values = eig.values.head(H).cwiseMax(0.0).cwiseSqrt();
  return out;
}

struct SVD {
  Matrix U;  // rows x r
  Vector s;  // r = min(rows, cols), non-increasing
  Matrix V;  // cols x r
};

/// Thin SVD via the Gram matrix of the smaller side. Right (or left) vectors
/// for numerically zero singular values are completed to an orthonormal set.
inline SVD thin_svd(const Matrix& Z) {
  detail::require_finite(Z, "thin_svd");
  const bool wide = Z.rows() <= Z.cols();
  const Matrix gram = wide ? Matrix(Z * Z.transpose()) : Matrix(Z.transpose() * Z);
  const auto eig = jacobi_eigen(gram);
  const Index r = gram.rows();
  SVD out;
  out.s = eig.values.cwiseMax(0.0).cwiseSqrt();
  // Eigenvalues of the Gram matrix carry absolute error ~ eps s_1^2, so
  // singular values below ~sqrt(eps) s_1 are indistinguishable from zero.
  const double cutoff = std::sqrt(std::numeric_limits<double>::epsilon() * static_cast<double>(r)) *
                        (r > 0 ? out.s(0) : 0.0);
  Index nonzero = 0;
  while (nonzero < r && out.s(nonzero) > cutoff) ++nonzero;
  out.s.tail(r - nonzero).setZero();

  Matrix side = eig.vectors;
  detail::fix_signs(side);
  Matrix other = wide ? Matrix(Z.transpose() * side) : Matrix(Z * side);
  for (Index j = 0; j < nonzero; ++j) other.col(j) /= out.s(j);
  other = detail::orthonormalize_and_complete(other, nonzero);
  if (wide) {
    out.U = std::move(side);
    out.V = std::move(other);
  } else {
    out.V = std::move(side);
    out.U = std::move(other);
  }
  return out;
}

/// Singular-value soft-thresholding: argmin_X 1/2||Z - X||_F^2 + eta ||X||_*.
/// Computed as P diag(max(s - eta, 0) / s) P^T Z on the smaller side, which is
/// P max(Sigma - eta, 0) Q^T with Q = Z^T P Sigma^{-1}.
inline Matrix prox_nuclear(const Matrix& Z, double eta) {
  if (!(eta >= 0.0)) throw ParameterError("prox_nuclear: eta must be non-negative");
  detail::require_finite(Z, "prox_nuclear");
  if (Z.size() == 0) return Z;
  const bool wide = Z.rows() <= Z.cols();
  const Matrix gram = wide ? Matrix(Z * Z.transpose()) : Matrix(Z.transpose() * Z);
  const auto eig = jacobi_eigen(gram);
  const Index r = gram.rows();
  Vector shrink(r);
  bool all_zero = true;
  for (Index j = 0; j < r; ++j) {
    const double s = std::sqrt(std::max(eig.values(j), 0.0));
    shrink(j) = s > eta ? (s - eta) / s : 0.0;
    if (eta == 0.0) shrink(j) = 1.0;
    all_zero = all_zero && shrink(j) == 0.0;
  }
  if (all_zero) return Matrix::Zero(Z.rows(), Z.cols());
  const Matrix& P = eig.vectors;
  const Matrix filter = P * shrink.asDiagonal() * P.transpose();
  return wide ? Matrix(filter * Z) : Matrix(Z * filter);
}

inline double nuclear_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  const Matrix gram = M.rows() <= M.cols() ? Matrix(M * M.transpose()) : Matrix(M.transpose() * M);
  return jacobi_eigen(gram).values.cwiseMax(0.0).cwiseSqrt().sum();
}

/// Largest singular value by power iteration on M^T M from the normalized
/// all-ones vector; relative tolerance 1e-10, at most 10000 iterations.
inline double spectral_norm(const Matrix& M, double rel_tol = 1e-10, int max_iter = 10000) {
  detail::require_finite(M, "spectral_norm");
  if (M.size() == 0 || M.isZero(0.0)) return 0.0;
  auto run = [&](Vector x) {
    x.normalize();
    double value = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      Vector y = M.transpose() * (M * x);
      const double next = std::sqrt(x.dot(y));
      const double ny = y.norm();
      if (ny == 0.0) return 0.0;
      x = y / ny;
      if (std::abs(next - value) <= rel_tol * next) return next;
      value = next;
    }
    return value;
  };
  double value = run(Vector::Ones(M.cols()));
  if (value == 0.0) {
    // all-ones start orthogonal to the row space: restart from the heaviest column
    Index j = 0;
    M.colwise().squaredNorm().maxCoeff(&j);
    value = run(Vector::Unit(M.cols(), j));
  }
  return value;
}

namespace detail {
inline void require_unit(const Vector& u, const char* who) {
  if (std::abs(u.norm() - 1.0) > 1e-8) throw ParameterError(std::string(who) + ": input is not unit-norm");
}
}  // namespace detail

/// min(||u - v||, ||u + v||) for unit vectors.
inline double dist(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw ShapeError("dist: length mismatch");
  detail::require_unit(u, "dist");
  detail::require_unit(v, "dist");
  return std::min((u - v).norm(), (u + v).norm());
}

/// Smallest principal-angle cosine between the column spans of orthonormal U, V.
inline double principal_cos(const Matrix& U, const Matrix& V) {
  if (U.rows() != V.rows() || U.cols() != V.cols()) throw ShapeError("principal_cos: shape mismatch");
  const Matrix gu = U.transpose() * U;
  const Matrix gv = V.transpose() * V;
  const Matrix I = Matrix::Identity(U.cols(), U.cols());
  if ((gu - I).norm() > 1e-8 || (gv - I).norm() > 1e-8) {
    throw ParameterError("principal_cos: columns are not orthonormal");
  }
  const Matrix C = U.transpose() * V;
  const auto eig = jacobi_eigen(C.transpose() * C);
  return std::min(1.0, std::sqrt(std::max(eig.values(eig.values.size() - 1), 0.0)));
}

}  // namespace subnorm

#endif  // SUBNORM_SPECTRAL_HPP
