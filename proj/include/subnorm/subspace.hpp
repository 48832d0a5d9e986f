#ifndef SUBNORM_SUBSPACE_HPP
#define SUBNORM_SUBSPACE_HPP

// Subspace-norm denoising:
//   1. P[k]  = top-H left singular vectors of the mode-k unfolding of Y
//   2. S[k]  = kron_except(P, k)   (ordering matched to unfold())
//   3. X_hat = argmin 1/2||Y - X||_F^2 + lambda ||X||_s
// where ||X||_s = inf { sum_k ||M[k]||_* : X = sum_k fold_k(M[k] S[k]^T) }.
// Step 3 is solved by ADMM on the dual problem
//   min_D lambda/2 ||D||^2 - <D, Y>   s.t. ||D_(k) S[k]|| <= 1 for all k,
// with the auxiliary W[k] = D_(k) S[k] eliminated analytically.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subnorm/errors.hpp"
#include "subnorm/spectral.hpp"
#include "subnorm/tensor.hpp"

namespace subnorm {

struct SubspaceBases {
  Index H = 0;
  Shape shape;
  std::vector<Matrix> P;  // P[k]: n_k x H, orthonormal columns
  std::vector<Matrix> S;  // S[k]: prod_{l != k} n_l x H^{K-1}

  Index order() const { return static_cast<Index>(P.size()); }
};

// Point in Span({S[k]}): X = sum_k fold_k(M[k] S[k]^T).
struct BlockFactors {
  std::vector<Matrix> M;  // M[k]: n_k x H^{K-1}
};

/// Assembles bases from given orthonormal per-mode factors (all with the same
/// column count H).
inline SubspaceBases bases_from_factors(std::vector<Matrix> P) {
  if (P.empty()) throw ShapeError("bases_from_factors: need at least one mode");
  SubspaceBases B;
  B.H = P.front().cols();
  for (const auto& Pk : P) {
    if (Pk.cols() != B.H) throw ShapeError("bases_from_factors: factors disagree on H");
    if (Pk.cols() > Pk.rows()) throw ParameterError("bases_from_factors: H exceeds a mode dimension");
    const Matrix gram = Pk.transpose() * Pk;
    if ((gram - Matrix::Identity(B.H, B.H)).norm() > 1e-8) {
      throw ParameterError("bases_from_factors: factor columns are not orthonormal");
    }
    B.shape.push_back(Pk.rows());
  }
  B.P = std::move(P);
  for (Index k = 0; k < B.order(); ++k) B.S.push_back(kron_except(B.P, k));
  return B;
}

inline SubspaceBases build_bases(const Tensor& Y, Index H) {
  const Index min_dim = *std::min_element(Y.shape().begin(), Y.shape().end());
  if (H < 1 || H > min_dim) {
    throw ParameterError("build_bases: H=" + std::to_string(H) + " must lie in [1, " +
                         std::to_string(min_dim) + "]");
  }
  std::vector<Matrix> P;
  for (Index k = 0; k < Y.order(); ++k) P.push_back(top_left_singular(unfold(Y, k), H).left_vectors);
  return bases_from_factors(std::move(P));
}

namespace detail {
inline void require_compatible(const Tensor& X, const SubspaceBases& B) {
  if (X.shape() != B.shape) {
    throw ShapeError("tensor shape " + shape_string(X.shape()) + " does not match bases shape " +
                     shape_string(B.shape));
  }
}
inline void require_compatible(const BlockFactors& M, const SubspaceBases& B) {
  if (static_cast<Index>(M.M.size()) != B.order()) throw ShapeError("block count does not match bases order");
  for (Index k = 0; k < B.order(); ++k) {
    const auto& Mk = M.M[static_cast<std::size_t>(k)];
    const auto& Sk = B.S[static_cast<std::size_t>(k)];
    if (Mk.rows() != B.shape[static_cast<std::size_t>(k)] || Mk.cols() != Sk.cols()) {
      throw ShapeError("block " + std::to_string(k) + " has shape " + std::to_string(Mk.rows()) + "x" +
                       std::to_string(Mk.cols()) + ", expected " +
                       std::to_string(B.shape[static_cast<std::size_t>(k)]) + "x" + std::to_string(Sk.cols()));
    }
  }
}

// unfold(X, k) * S[k], evaluated as unfold(X x_{l != k} P[l]^T, k) with the
// largest modes contracted first.
inline Matrix contract_except(const Tensor& X, const SubspaceBases& B, Index k) {
  std::vector<Index> modes;
  for (Index l = 0; l < B.order(); ++l)
    if (l != k) modes.push_back(l);
  std::stable_sort(modes.begin(), modes.end(), [&](Index a, Index b) {
    return B.shape[static_cast<std::size_t>(a)] > B.shape[static_cast<std::size_t>(b)];
  });
  if (modes.empty()) return unfold(X, k);
  Tensor T = mode_product(X, B.P[static_cast<std::size_t>(modes[0])].transpose(), modes[0]);
  for (std::size_t i = 1; i < modes.size(); ++i) {
    T = mode_product(T, B.P[static_cast<std::size_t>(modes[i])].transpose(), modes[i]);
  }
  return unfold(T, k);
}

// fold(M S[k]^T, k, shape), evaluated as fold_k(M) x_{l != k} P[l] with the
// smallest modes expanded first.
inline Tensor expand_block(const Matrix& M, const SubspaceBases& B, Index k) {
  Shape small(B.shape.size(), B.H);
  small[static_cast<std::size_t>(k)] = B.shape[static_cast<std::size_t>(k)];
  std::vector<Index> modes;
  for (Index l = 0; l < B.order(); ++l)
    if (l != k) modes.push_back(l);
  std::stable_sort(modes.begin(), modes.end(), [&](Index a, Index b) {
    return B.shape[static_cast<std::size_t>(a)] < B.shape[static_cast<std::size_t>(b)];
  });
  Tensor T = fold(M, k, small);
  for (Index l : modes) T = mode_product(T, B.P[static_cast<std::size_t>(l)], l);
  return T;
}
}  // namespace detail

inline BlockFactors zero_blocks(const SubspaceBases& B) {
  BlockFactors out;
  for (Index k = 0; k < B.order(); ++k) {
    out.M.push_back(Matrix::Zero(B.shape[static_cast<std::size_t>(k)], B.S[static_cast<std::size_t>(k)].cols()));
  }
  return out;
}

/// max_k ||X_(k) S[k]||.
inline double dual_norm(const Tensor& X, const SubspaceBases& B) {
  detail::require_compatible(X, B);
  double out = 0.0;
  for (Index k = 0; k < B.order(); ++k) {
    out = std::max(out, spectral_norm(detail::contract_except(X, B, k)));
  }
  return out;
}

/// sum_k ||M[k]||_* for this particular decomposition.
inline double subspace_norm_value(const BlockFactors& M) {
  double out = 0.0;
  for (const auto& Mk : M.M) out += nuclear_norm(Mk);
  return out;
}

inline Tensor compose(const BlockFactors& M, const SubspaceBases& B) {
  detail::require_compatible(M, B);
  Tensor out(B.shape);
  for (Index k = 0; k < B.order(); ++k) out += detail::expand_block(M.M[static_cast<std::size_t>(k)], B, k);
  return out;
}

/// Orthogonal projection onto Span({S[k]}). With Pi_l = P[l] P[l]^T the span
/// is every tensor whose components carry at most one Pi_l^perp factor, so
/// proj(X) = sum_k fold_k(X_(k) S[k] S[k]^T) - (K - 1) X x_1 Pi_1 ... x_K Pi_K.
inline Tensor project_onto_span(const Tensor& X, const SubspaceBases& B) {
  detail::require_compatible(X, B);
  Tensor out(B.shape);
  for (Index k = 0; k < B.order(); ++k) out += detail::expand_block(detail::contract_except(X, B, k), B, k);
  if (B.order() > 1) {
    Tensor core_part = X;
    for (Index l = 0; l < B.order(); ++l) {
      const auto& Pl = B.P[static_cast<std::size_t>(l)];
      core_part = mode_product(core_part, Pl * Pl.transpose(), l);
    }
    out -= static_cast<double>(B.order() - 1) * core_part;
  }
  return out;
}

/// sigma * (max_k (sqrt(n_k) + sqrt(H^{K-1})) + sqrt(2 log K)).
inline double theoretical_lambda(double sigma, const Shape& dims, Index H) {
  const auto K = static_cast<double>(dims.size());
  const double kron_width = std::sqrt(std::pow(static_cast<double>(H), K - 1.0));
  double widest = 0.0;
  for (Index n : dims) widest = std::max(widest, std::sqrt(static_cast<double>(n)) + kron_width);
  return sigma * (widest + std::sqrt(2.0 * std::log(K)));
}

struct AdmmOptions {
  std::optional<double> eta;  // unset: eta = lambda
  int max_iter = 2000;
  double tol = 1e-6;
  bool track_objective = false;  // record the dual objective every iteration
};

// Iterate of the dual ADMM: D_t, M_t, M_{t-1} and the residuals of the last step.
struct AdmmState {
  Tensor D;
  BlockFactors current;
  BlockFactors previous;
  Tensor estimate;           // compose(current)
  Tensor previous_estimate;  // compose(previous)
  double eta = 1.0;
  double lambda = 1.0;
  int iteration = 0;
  double primal_residual = std::numeric_limits<double>::infinity();  // max_k ||D_(k) S[k] - W[k]||_F
  double dual_residual = std::numeric_limits<double>::infinity();    // max_k ||M_{t+1}[k] - M_t[k]||_F
  double kkt_residual = std::numeric_limits<double>::infinity();     // ||Y - X_t - lambda D_t||_F
};

inline AdmmState admm_init(const SubspaceBases& B, double lambda, double eta) {
  if (!(lambda > 0.0)) throw ParameterError("admm: lambda must be positive");
  if (!(eta > 0.0)) throw ParameterError("admm: eta must be positive");
  AdmmState st;
  st.D = Tensor(B.shape);
  st.current = zero_blocks(B);
  st.previous = st.current;
  st.estimate = Tensor(B.shape);
  st.previous_estimate = st.estimate;
  st.eta = eta;
  st.lambda = lambda;
  return st;
}

/// One ADMM sweep:
///   D <- (Y + K eta D - sum_k fold_k((2 M_t[k] - M_{t-1}[k]) S[k]^T)) / (lambda + eta K)
///   M[k] <- prox_eta(M_t[k] + eta D_(k) S[k])
/// W[k] = clip_{||.|| <= 1}(D_(k) S[k] + M_t[k] / eta) is implicit, so the
/// primal residual D_(k) S[k] - W[k] equals (M_{t+1}[k] - M_t[k]) / eta.
inline void admm_step(AdmmState& st, const Tensor& Y, const SubspaceBases& B) {
  const Index K = B.order();
  const double eta = st.eta;
  const double Keta = static_cast<double>(K) * eta;
  // sum_k fold_k((2 M_t[k] - M_{t-1}[k]) S[k]^T) = 2 X_t - X_{t-1} by linearity.
  st.D.vec() = (Y.vec() + Keta * st.D.vec() - 2.0 * st.estimate.vec() + st.previous_estimate.vec()) /
               (st.lambda + Keta);

  BlockFactors next;
  double change = 0.0;
  for (Index k = 0; k < K; ++k) {
    const auto i = static_cast<std::size_t>(k);
    next.M.push_back(prox_nuclear(st.current.M[i] + eta * detail::contract_except(st.D, B, k), eta));
    change = std::max(change, (next.M[i] - st.current.M[i]).norm());
  }
  st.previous = std::move(st.current);
  st.current = std::move(next);
  st.previous_estimate = std::move(st.estimate);
  st.estimate = compose(st.current, B);
  st.primal_residual = change / eta;
  st.dual_residual = change;
  st.kkt_residual = (Y.vec() - st.estimate.vec() - st.lambda * st.D.vec()).norm();
  ++st.iteration;
}

struct AdmmDiagnostics {
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double kkt_residual = 0.0;
  std::vector<double> dual_objective;  // lambda/2 ||D||^2 - <D, Y> per iteration (if tracked)
};

struct AdmmResult {
  Tensor estimate;
  BlockFactors blocks;
  Tensor dual;
  AdmmDiagnostics diagnostics;
};

/// Solves min_X 1/2||Y - X||_F^2 + lambda ||X||_s from D_0 = 0, M_{-1} = M_0 = 0.
/// Converged when the multiplier change and ||Y - X - lambda D||_F are both
/// <= tol ||Y||_F and the primal residual, which lives on the scale of D, is
/// <= tol ||Y||_F / lambda. Every threshold is homogeneous in (Y, lambda), so
/// (c Y, c lambda) retraces c times the (Y, lambda) path and stops at the same
/// iteration. Without convergence the iterate with the smallest scaled
/// residual is returned.
inline AdmmResult admm_denoise(const Tensor& Y, const SubspaceBases& B, double lambda, const AdmmOptions& opts = {}) {
  detail::require_compatible(Y, B);
  if (opts.max_iter < 1) throw ParameterError("admm: max_iter must be positive");
  AdmmState st = admm_init(B, lambda, opts.eta.value_or(lambda));
  const double ynorm = fro_norm(Y);
  const double scale = opts.tol * (ynorm > 0.0 ? ynorm : 1.0);

  AdmmResult best;
  double best_score = std::numeric_limits<double>::infinity();
  auto keep = [&](const AdmmState& s) {
    best.blocks = s.current;
    best.estimate = s.estimate;
    best.dual = s.D;
    best.diagnostics.iterations = s.iteration;
    best.diagnostics.primal_residual = s.primal_residual;
    best.diagnostics.dual_residual = s.dual_residual;
    best.diagnostics.kkt_residual = s.kkt_residual;
  };

  std::vector<double> history;
  bool converged = false;
  while (st.iteration < opts.max_iter) {
    admm_step(st, Y, B);
    if (opts.track_objective) {
      history.push_back(0.5 * st.lambda * inner(st.D, st.D) - inner(st.D, Y));
    }
    const double score =
        std::max({lambda * st.primal_residual, st.dual_residual, st.kkt_residual}) / scale;
    if (score <= 1.0) {
      converged = true;
      keep(st);
      break;
    }
    if (score < best_score) {
      best_score = score;
      keep(st);
    }
  }
  best.diagnostics.converged = converged;
  best.diagnostics.dual_objective = std::move(history);
  if (!converged) best.diagnostics.iterations = st.iteration;

  return best;
}

/// Incoherence diagnostic rho_hat = K max_{k != l} ||fold_k(M[k])_(l)|| / (sqrt(n_k) + sqrt(H^{K-1})),
/// where fold_k(M[k]) is the n_k x H x ... x H tensor whose mode-k unfolding is M[k].
inline double incoherence(const BlockFactors& M, const SubspaceBases& B) {
  detail::require_compatible(M, B);
  const Index K = B.order();
  const double width = std::sqrt(std::pow(static_cast<double>(B.H), static_cast<double>(K - 1)));
  double rho = 0.0;
  for (Index k = 0; k < K; ++k) {
    const auto i = static_cast<std::size_t>(k);
    Shape small(static_cast<std::size_t>(K), B.H);
    small[i] = B.shape[i];
    const Tensor T = fold(M.M[i], k, small);
    const double denom = std::sqrt(static_cast<double>(B.shape[i])) + width;
    for (Index l = 0; l < K; ++l) {
      if (l == k) continue;
      rho = std::max(rho, static_cast<double>(K) * spectral_norm(unfold(T, l)) / denom);
    }
  }
  return rho;
}

}  // namespace subnorm

#endif  // SUBNORM_SUBSPACE_HPP
