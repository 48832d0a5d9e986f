#ifndef SUBNORM_BASELINES_HPP
#define SUBNORM_BASELINES_HPP

// Comparison estimators: overlapped and latent trace-norm denoising (primal
// ADMM with per-mode splitting), ridge-regularized CP-ALS with random
// restarts, and the "optimistic" error line.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "subnorm/errors.hpp"
#include "subnorm/random.hpp"
#include "subnorm/spectral.hpp"
#include "subnorm/tensor.hpp"

namespace subnorm {

struct TraceNormOptions {
  double eta = 1.0;
  int max_iter = 2000;
  double tol = 1e-5;
  bool track_objective = false;
};

struct TraceNormResult {
  Tensor estimate;
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::vector<double> objective;  // primal objective at each iterate (if tracked)
};

inline double overlapped_objective(const Tensor& Y, const Tensor& X, double lambda) {
  double pen = 0.0;
  for (Index k = 0; k < X.order(); ++k) pen += nuclear_norm(unfold(X, k));
  const double r = fro_norm(Y - X);
  return 0.5 * r * r + lambda * pen;
}

/// argmin_X 1/2||Y - X||_F^2 + lambda sum_k ||X_(k)||_*.
/// Splitting X = Z_k for every mode with scaled multipliers A_k:
///   X   <- (Y + sum_k (eta Z_k - A_k)) / (1 + K eta)
///   Z_k <- fold_k(prox_{lambda/eta}((X + A_k/eta)_(k)))
///   A_k <- A_k + eta (X - Z_k)
/// The estimate is the average of the Z_k (each exactly low rank).
inline TraceNormResult overlapped_denoise(const Tensor& Y, double lambda, const TraceNormOptions& opts = {}) {
  if (!(lambda > 0.0)) throw ParameterError("overlapped_denoise: lambda must be positive");
  if (!(opts.eta > 0.0)) throw ParameterError("overlapped_denoise: eta must be positive");
  const Index K = Y.order();
  const double eta = opts.eta;
  const double threshold = opts.tol * std::max(fro_norm(Y), 1e-300);
  std::vector<Tensor> Z(static_cast<std::size_t>(K), Tensor(Y.shape()));
  std::vector<Tensor> A(static_cast<std::size_t>(K), Tensor(Y.shape()));
  TraceNormResult res;
  Tensor X(Y.shape());
  for (int it = 0; it < opts.max_iter; ++it) {
    X = Y;
    for (Index k = 0; k < K; ++k) {
      const auto i = static_cast<std::size_t>(k);
      X += eta * Z[i];
      X -= A[i];
    }
    X *= 1.0 / (1.0 + static_cast<double>(K) * eta);

    double primal = 0.0, dual = 0.0;
    for (Index k = 0; k < K; ++k) {
      const auto i = static_cast<std::size_t>(k);
      Tensor target = X + (1.0 / eta) * A[i];
      Tensor next = fold(prox_nuclear(unfold(target, k), lambda / eta), k, Y.shape());
      const double dz = fro_norm(next - Z[i]);
      dual += dz * dz;
      Z[i] = std::move(next);
      Tensor gap = X - Z[i];
      primal += inner(gap, gap);
      A[i] += eta * gap;
    }
    res.primal_residual = std::sqrt(primal);
    res.dual_residual = eta * std::sqrt(dual);
    res.iterations = it + 1;

    if (opts.track_objective) {
      Tensor est(Y.shape());
      for (const auto& z : Z) est += z;
      est *= 1.0 / static_cast<double>(K);
      res.objective.push_back(overlapped_objective(Y, est, lambda));
    }
    if (res.primal_residual <= threshold && res.dual_residual <= threshold) {
      res.converged = true;
      break;
    }
  }
  res.estimate = Tensor(Y.shape());
  for (const auto& z : Z) res.estimate += z;
  res.estimate *= 1.0 / static_cast<double>(K);
  return res;
}

/// argmin over splits X = sum_k Z_k of 1/2||Y - X||_F^2 + lambda sum_k ||(Z_k)_(k)||_*.
/// ADMM on Z_k = V_k with the nuclear norm carried by V_k:
///   Z   <- solve  eta Z_k + sum_j Z_j = Y + eta V_k - A_k  (closed form)
///   V_k <- fold_k(prox_{lambda/eta}((Z_k + A_k/eta)_(k)))
///   A_k <- A_k + eta (Z_k - V_k)
/// The estimate is sum_k V_k.
inline TraceNormResult latent_denoise(const Tensor& Y, double lambda, const TraceNormOptions& opts = {}) {
  if (!(lambda > 0.0)) throw ParameterError("latent_denoise: lambda must be positive");
  if (!(opts.eta > 0.0)) throw ParameterError("latent_denoise: eta must be positive");
  const Index K = Y.order();
  const auto Kd = static_cast<double>(K);
  const double eta = opts.eta;
  const double threshold = opts.tol * std::max(fro_norm(Y), 1e-300);
  std::vector<Tensor> Z(static_cast<std::size_t>(K), Tensor(Y.shape()));
  std::vector<Tensor> V = Z;
  std::vector<Tensor> A = Z;
  TraceNormResult res;
  for (int it = 0; it < opts.max_iter; ++it) {
    // R_k = Y + eta V_k - A_k;  sum_j Z_j = sum_k R_k / (eta + K);  Z_k = (R_k - sum_j Z_j) / eta
    std::vector<Tensor> R;
    Tensor total(Y.shape());
    for (Index k = 0; k < K; ++k) {
      const auto i = static_cast<std::size_t>(k);
      Tensor r = Y + eta * V[i];
      r -= A[i];
      total += r;
      R.push_back(std::move(r));
    }
    total *= 1.0 / (eta + Kd);
    for (Index k = 0; k < K; ++k) {
      const auto i = static_cast<std::size_t>(k);
      Z[i] = (1.0 / eta) * (R[i] - total);
    }

    double primal = 0.0, dual = 0.0;
    for (Index k = 0; k < K; ++k) {
      const auto i = static_cast<std::size_t>(k);
      Tensor target = Z[i] + (1.0 / eta) * A[i];
      Tensor next = fold(prox_nuclear(unfold(target, k), lambda / eta), k, Y.shape());
      const double dv = fro_norm(next - V[i]);
      dual += dv * dv;
      V[i] = std::move(next);
      Tensor gap = Z[i] - V[i];
      primal += inner(gap, gap);
      A[i] += eta * gap;
    }
    res.primal_residual = std::sqrt(primal);
    res.dual_residual = eta * std::sqrt(dual);
    res.iterations = it + 1;

    if (opts.track_objective) {
      Tensor est(Y.shape());
      double pen = 0.0;
      for (Index k = 0; k < K; ++k) {
        est += V[static_cast<std::size_t>(k)];
        pen += nuclear_norm(unfold(V[static_cast<std::size_t>(k)], k));
      }
      const double r = fro_norm(Y - est);
      res.objective.push_back(0.5 * r * r + lambda * pen);
    }
    if (res.primal_residual <= threshold && res.dual_residual <= threshold) {
      res.converged = true;
      break;
    }
  }
  res.estimate = Tensor(Y.shape());
  for (const auto& v : V) res.estimate += v;
  return res;
}

struct CpModel {
  Index R = 0;
  std::vector<Matrix> factors;  // n_k x R, unit-norm columns
  Vector weights;               // R
  double objective = 0.0;       // 1/2||Y - X||^2 + l2_reg sum_k ||A_k||_F^2 at the raw factors
  int sweeps = 0;
  int best_init = 0;
};

struct CpOptions {
  double l2_reg = 0.0;
  int max_sweeps = 500;
  double tol = 1e-8;             // relative objective change
  bool track_objective = false;  // keep the per-sweep objective of the selected init
};

struct CpFit {
  CpModel model;
  std::vector<double> objective_history;
};

/// Khatri-Rao product of all factors except mode k, ordered like kron_except().
inline Matrix khatri_rao_except(std::span<const Matrix> factors, Index k) {
  const Index R = factors.front().cols();
  Index rows = 1;
  for (Index l = 0; l < static_cast<Index>(factors.size()); ++l)
    if (l != k) rows *= factors[static_cast<std::size_t>(l)].rows();
  Matrix out(rows, R);
  for (Index r = 0; r < R; ++r) {
    Matrix col = Matrix::Ones(1, 1);
    for (Index l = static_cast<Index>(factors.size()) - 1; l >= 0; --l) {
      if (l == k) continue;
      col = kron(col, factors[static_cast<std::size_t>(l)].col(r));
    }
    out.col(r) = col.col(0);
  }
  return out;
}

inline Tensor cp_reconstruct(std::span<const Matrix> factors, const Vector& weights) {
  Shape shape;
  for (const auto& A : factors) shape.push_back(A.rows());
  Matrix first = factors[0] * weights.asDiagonal();
  return fold(first * khatri_rao_except(factors, 0).transpose(), 0, shape);
}

inline Tensor cp_reconstruct(const CpModel& model) { return cp_reconstruct(model.factors, model.weights); }

namespace detail {

inline double cp_objective(const Tensor& Y, std::span<const Matrix> A, double l2) {
  const Tensor X = cp_reconstruct(A, Vector::Ones(A.front().cols()));
  const double r = fro_norm(Y - X);
  double pen = 0.0;
  for (const auto& Ak : A) pen += Ak.squaredNorm();
  return 0.5 * r * r + l2 * pen;
}

}  // namespace detail

/// Alternating ridge least squares, best of n_inits random starts. Each
/// restart draws its initial factors from derive_seed(seed, {init}); the
/// lowest objective wins, ties going to the lower init index. Block updates
/// solve A_k (G_k + 2 l2 I) = Y_(k) KR_k with a ridge floor of 1e-10.
inline CpFit cp_als(const Tensor& Y, Index R, int n_inits, std::uint64_t seed, const CpOptions& opts = {}) {
  if (R < 1) throw ParameterError("cp_als: rank must be at least 1");
  if (n_inits < 1) throw ParameterError("cp_als: need at least one initialization");
  if (opts.l2_reg < 0.0) throw ParameterError("cp_als: l2_reg must be non-negative");
  const Index K = Y.order();
  const double ridge = std::max(2.0 * opts.l2_reg, 1e-10);
  std::vector<Matrix> unfolded;
  for (Index k = 0; k < K; ++k) unfolded.push_back(unfold(Y, k));

  CpFit best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_factors;
  for (int init = 0; init < n_inits; ++init) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(init)}));
    std::vector<Matrix> A;
    for (Index k = 0; k < K; ++k) A.push_back(rng.gaussian_matrix(Y.dim(k), R));
    std::vector<double> history;
    double obj = detail::cp_objective(Y, A, opts.l2_reg);
    int sweeps = 0;
    for (; sweeps < opts.max_sweeps;) {
      for (Index k = 0; k < K; ++k) {
        Matrix G = Matrix::Ones(R, R);
        for (Index l = 0; l < K; ++l) {
          if (l == k) continue;
          const auto& Al = A[static_cast<std::size_t>(l)];
          G = G.cwiseProduct(Al.transpose() * Al);
        }
        G.diagonal().array() += ridge;
        const Matrix rhs = unfolded[static_cast<std::size_t>(k)] * khatri_rao_except(A, k);
        A[static_cast<std::size_t>(k)] = G.ldlt().solve(rhs.transpose()).transpose();
      }
      ++sweeps;
      const double next = detail::cp_objective(Y, A, opts.l2_reg);
      if (opts.track_objective) history.push_back(next);
      const bool done = std::abs(obj - next) <= opts.tol * std::max(obj, 1e-300);
      obj = next;
      if (done) break;
    }
    if (obj < best_obj) {
      best_obj = obj;
      best_factors = A;
      best.model.sweeps = sweeps;
      best.model.best_init = init;
      best.objective_history = std::move(history);
    }
  }

  CpModel& m = best.model;
  m.R = R;
  m.objective = best_obj;
  m.weights = Vector::Ones(R);
  for (auto& Ak : best_factors) {
    for (Index r = 0; r < R; ++r) {
      const double nrm = Ak.col(r).norm();
      if (nrm > 0.0) {
        Ak.col(r) /= nrm;
        m.weights(r) *= nrm;
      } else {
        Ak.col(r) = Vector::Unit(Ak.rows(), 0);
        m.weights(r) = 0.0;
      }
    }
  }
  m.factors = std::move(best_factors);
  return best;
}

/// sigma sqrt(R sum_k n_k log K) / ||X*||_F.
inline double optimistic_error(double sigma, Index R, const Shape& dims, double signal_fro, Index K) {
  if (sigma < 0.0) throw ParameterError("optimistic_error: sigma must be non-negative");
  if (R < 1) throw ParameterError("optimistic_error: R must be positive");
  if (!(signal_fro > 0.0)) throw ParameterError("optimistic_error: signal norm must be positive");
  if (K < 1 || static_cast<Index>(dims.size()) != K) throw ParameterError("optimistic_error: dims must have K entries");
  double total = 0.0;
  for (Index n : dims) total += static_cast<double>(n);
  return sigma * std::sqrt(static_cast<double>(R) * total * std::log(static_cast<double>(K))) / signal_fro;
}

}  // namespace subnorm

#endif  // SUBNORM_BASELINES_HPP
