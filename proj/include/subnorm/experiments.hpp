#ifndef SUBNORM_EXPERIMENTS_HPP
#define SUBNORM_EXPERIMENTS_HPP

// Seeded synthetic data and the Monte-Carlo sweeps built on it. Every sweep
// is a pure function of its parameters and master seed: job (grid point g,
// trial t) draws from derive_seed(seed, {g, t}) and output rows are sorted
// by grid indices, then trial, whatever order the jobs finish in.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "subnorm/baselines.hpp"
#include "subnorm/csv.hpp"
#include "subnorm/errors.hpp"
#include "subnorm/random.hpp"
#include "subnorm/spectral.hpp"
#include "subnorm/subspace.hpp"
#include "subnorm/tensor.hpp"

namespace subnorm {

struct SyntheticSpec {
  Shape dims;
  std::vector<double> betas;  // non-increasing, positive
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool orthonormal_factors = true;
};

struct SyntheticInstance {
  Tensor truth;                 // sum_r beta_r u_r^(1) o ... o u_r^(K)
  Tensor observed;              // truth + sigma * noise
  Tensor noise;                 // i.i.d. N(0, 1)
  std::vector<Matrix> factors;  // n_k x R, unit-norm columns
};

/// Draws the factors (mode 0 first) and then the noise from one stream seeded
/// with spec.seed.
inline SyntheticInstance gen_synthetic(const SyntheticSpec& spec) {
  if (spec.dims.empty()) throw ParameterError("gen_synthetic: dims must be non-empty");
  for (Index n : spec.dims)
    if (n < 1) throw ParameterError("gen_synthetic: dims must be positive");
  if (spec.betas.empty()) throw ParameterError("gen_synthetic: need at least one beta");
  for (std::size_t r = 0; r < spec.betas.size(); ++r) {
    if (!(spec.betas[r] > 0.0)) throw ParameterError("gen_synthetic: betas must be positive");
    if (r > 0 && spec.betas[r] > spec.betas[r - 1]) throw ParameterError("gen_synthetic: betas must be descending");
  }
  if (!(spec.sigma >= 0.0)) throw ParameterError("gen_synthetic: sigma must be non-negative");
  const auto R = static_cast<Index>(spec.betas.size());
  const Index min_dim = *std::min_element(spec.dims.begin(), spec.dims.end());
  if (spec.orthonormal_factors && R > min_dim) {
    throw ParameterError("gen_synthetic: R=" + std::to_string(R) + " exceeds smallest dimension " +
                         std::to_string(min_dim) + " with orthonormal factors");
  }

  Rng rng(spec.seed);
  SyntheticInstance out;
  for (Index n : spec.dims) {
    if (spec.orthonormal_factors) {
      out.factors.push_back(rng.orthonormal(n, R));
    } else {
      Matrix A = rng.gaussian_matrix(n, R);
      A.colwise().normalize();
      out.factors.push_back(std::move(A));
    }
  }
  const Vector betas = Eigen::Map<const Vector>(spec.betas.data(), R);
  out.truth = cp_reconstruct(out.factors, betas);
  out.noise = rng.gaussian_tensor(spec.dims);
  out.observed = spec.sigma == 0.0 ? out.truth : out.truth + spec.sigma * out.noise;
  return out;
}

/// ||X_hat - X*||_F / ||X*||_F.
inline double relative_error(const Tensor& estimate, const Tensor& truth) {
  estimate.require_same_shape(truth);
  const double denom = fro_norm(truth);
  if (denom == 0.0) throw ParameterError("relative_error: true tensor is zero");
  return fro_norm(estimate - truth) / denom;
}

inline std::vector<double> logspace(double lo, double hi, int points) {
  if (points < 1 || !(lo > 0.0) || !(hi > 0.0)) throw ParameterError("logspace: need positive bounds and points");
  std::vector<double> out;
  if (points == 1) return {lo};
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < points; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (points - 1)));
  out.back() = hi;
  out.front() = lo;
  return out;
}

/// 24 log-spaced points over [0.25, 8] x (nm)^{1/4}.
inline std::vector<double> default_snr_grid(Index n, Index m, int points = 24) {
  const double thr = std::pow(static_cast<double>(n) * static_cast<double>(m), 0.25);
  return logspace(0.25 * thr, 8.0 * thr, points);
}

namespace detail {

// Runs job(i) for i in [0, count) on up to `threads` workers.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& job) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < std::min<int>(threads, static_cast<int>(count)); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix phase transition: X = (beta/sigma) u v^T + E, u estimated by the top
// left singular vector.

struct MatrixPhaseRecord {
  Index n = 0;
  Index m = 0;
  int grid_index = 0;
  double snr = 0.0;  // beta / sigma (sigma = 1)
  int trial = 0;
  std::uint64_t seed = 0;
  double abs_inner = 0.0;  // |<u_hat, u>|
  double dist = 0.0;       // min(||u_hat - u||, ||u_hat + u||)
};

inline std::vector<MatrixPhaseRecord> matrix_phase_sweep(Index n, Index m, const std::vector<double>& snr_grid,
                                                         int trials, std::uint64_t seed, int threads = 1) {
  if (n < 1 || m < 1) throw ParameterError("matrix_phase_sweep: dimensions must be positive");
  if (n > m) throw ParameterError("matrix_phase_sweep: need n <= m");
  if (trials < 1) throw ParameterError("matrix_phase_sweep: trials must be positive");
  std::vector<MatrixPhaseRecord> out(snr_grid.size() * static_cast<std::size_t>(trials));
  detail::parallel_for(out.size(), threads, [&](std::size_t job) {
    const int g = static_cast<int>(job / static_cast<std::size_t>(trials));
    const int t = static_cast<int>(job % static_cast<std::size_t>(trials));
    MatrixPhaseRecord rec;
    rec.n = n;
    rec.m = m;
    rec.grid_index = g;
    rec.snr = snr_grid[static_cast<std::size_t>(g)];
    rec.trial = t;
    rec.seed = derive_seed(seed, {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(t)});
    Rng rng(rec.seed);
    const Vector u = rng.unit_vector(n);
    const Vector v = rng.unit_vector(m);
    Matrix X = rng.gaussian_matrix(n, m);
    X.noalias() += rec.snr * u * v.transpose();
    const Vector u_hat = top_left_singular(X, 1).left_vectors.col(0);
    rec.abs_inner = std::abs(u_hat.dot(u));
    rec.dist = dist(u_hat, u);
    out[job] = rec;
  });
  return out;
}

inline void write_csv(std::ostream& out, const std::vector<MatrixPhaseRecord>& records) {
  write_csv_header(out, {"n", "m", "grid_index", "snr", "snr_over_threshold", "trial", "seed", "abs_inner",
                         "abs_inner_sq", "one_minus_abs_inner", "dist"});
  for (const auto& r : records) {
    const double thr = std::pow(static_cast<double>(r.n) * static_cast<double>(r.m), 0.25);
    CsvRow row;
    row.add(static_cast<std::int64_t>(r.n))
        .add(static_cast<std::int64_t>(r.m))
        .add(r.grid_index)
        .add(r.snr)
        .add(r.snr / thr)
        .add(r.trial)
        .add(r.seed)
        .add(r.abs_inner)
        .add(r.abs_inner * r.abs_inner)
        .add(1.0 - r.abs_inner)
        .add(r.dist);
    write_csv_line(out, row.fields());
  }
}

// ---------------------------------------------------------------------------
// Tensor phase transition: top-R left singular vectors of the mode-1 unfolding
// of a rank-R orthogonal CP tensor plus noise.

struct TensorPhaseRecord {
  Shape dims;
  std::vector<double> betas;
  int grid_index = 0;
  double sigma = 0.0;
  double normalized_sigma = 0.0;  // sigma (prod n_k)^{1/4}
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> abs_inner;  // |<u_r^(1), u_hat_r^(1)>|, r = 1..R
};

inline double fourth_root_volume(const Shape& dims) {
  double vol = 1.0;
  for (Index n : dims) vol *= static_cast<double>(n);
  return std::pow(vol, 0.25);
}

inline std::vector<TensorPhaseRecord> tensor_phase_sweep(const Shape& dims, const std::vector<double>& betas,
                                                         const std::vector<double>& sigma_grid, int trials,
                                                         std::uint64_t seed, int threads = 1) {
  if (trials < 1) throw ParameterError("tensor_phase_sweep: trials must be positive");
  const auto R = static_cast<Index>(betas.size());
  std::vector<TensorPhaseRecord> out(sigma_grid.size() * static_cast<std::size_t>(trials));
  const double scale = fourth_root_volume(dims);
  detail::parallel_for(out.size(), threads, [&](std::size_t job) {
    const int g = static_cast<int>(job / static_cast<std::size_t>(trials));
    const int t = static_cast<int>(job % static_cast<std::size_t>(trials));
    TensorPhaseRecord rec;
    rec.dims = dims;
    rec.betas = betas;
    rec.grid_index = g;
    rec.sigma = sigma_grid[static_cast<std::size_t>(g)];
    rec.normalized_sigma = rec.sigma * scale;
    rec.trial = t;
    rec.seed = derive_seed(seed, {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(t)});
    const auto inst = gen_synthetic({dims, betas, rec.sigma, rec.seed, true});
    const Matrix U_hat = top_left_singular(unfold(inst.observed, 0), R).left_vectors;
    for (Index r = 0; r < R; ++r) rec.abs_inner.push_back(std::abs(U_hat.col(r).dot(inst.factors[0].col(r))));
    out[job] = std::move(rec);
  });
  return out;
}

inline std::string join_values(const Shape& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "x" : "") + std::to_string(v[i]);
  return s;
}

inline std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
  return s;
}

inline void write_csv(std::ostream& out, const std::vector<TensorPhaseRecord>& records) {
  std::vector<std::string> header{"dims", "betas", "grid_index", "sigma", "normalized_sigma", "trial", "seed"};
  const std::size_t R = records.empty() ? 0 : records.front().abs_inner.size();
  for (std::size_t r = 1; r <= R; ++r) header.push_back("abs_inner_" + std::to_string(r));
  for (std::size_t r = 1; r <= R; ++r) header.push_back("threshold_sigma_" + std::to_string(r));
  write_csv_header(out, header);
  for (const auto& rec : records) {
    CsvRow row;
    row.add(join_values(rec.dims))
        .add(join_values(rec.betas))
        .add(rec.grid_index)
        .add(rec.sigma)
        .add(rec.normalized_sigma)
        .add(rec.trial)
        .add(rec.seed);
    for (double v : rec.abs_inner) row.add(v);
    for (double b : rec.betas) row.add(b / fourth_root_volume(rec.dims));
    write_csv_line(out, row.fields());
  }
}

// ---------------------------------------------------------------------------
// Denoising sweep over noise levels, methods and regularization grids.

enum class Method { Subspace, SubspaceTheory, Overlapped, Latent, Cp };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Subspace: return "subspace";
    case Method::SubspaceTheory: return "subspace_theory";
    case Method::Overlapped: return "overlapped";
    case Method::Latent: return "latent";
    case Method::Cp: return "cp";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::Subspace, Method::SubspaceTheory, Method::Overlapped, Method::Latent, Method::Cp}) {
    if (method_name(m) == s) return m;
  }
  throw ParameterError("unknown method '" + s + "'");
}

struct DenoiseSweepConfig {
  Shape dims{20, 30, 40};
  std::vector<double> betas{20.0, 10.0};
  Index H = 2;  // subspace dimension; also the CP input rank
  std::vector<Method> methods{Method::Subspace, Method::Overlapped, Method::Latent};
  std::vector<double> lambda_grid = logspace(1.0, 100.0, 20);
  std::vector<double> sigma_grid = logspace(0.01, 10.0, 20);
  int trials = 10;
  std::uint64_t seed = 0;
  bool theory_lambda = true;  // extra subspace row at the theoretically motivated lambda
  std::vector<double> cp_l2_grid{0.0};
  int cp_inits = 20;
  AdmmOptions admm{};
  TraceNormOptions trace{};
  CpOptions cp{};
  int threads = 1;
};

struct DenoiseRecord {
  int sigma_index = 0;
  double sigma = 0.0;
  Method method = Method::Subspace;
  int lambda_index = 0;
  double lambda = 0.0;  // regularization (l2_reg for cp)
  int trial = 0;
  std::uint64_t seed = 0;
  double relative_error = 0.0;
  int iterations = 0;
  bool converged = true;
  double optimistic = 0.0;
  double wall_time = 0.0;
};

inline std::vector<DenoiseRecord> denoise_sweep(const DenoiseSweepConfig& cfg) {
  if (cfg.trials < 1) throw ParameterError("denoise_sweep: trials must be positive");
  if (cfg.sigma_grid.empty()) throw ParameterError("denoise_sweep: empty sigma grid");
  const std::size_t jobs = cfg.sigma_grid.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<DenoiseRecord>> per_job(jobs);
  const auto K = static_cast<Index>(cfg.dims.size());
  const auto R = static_cast<Index>(cfg.betas.size());

  detail::parallel_for(jobs, cfg.threads, [&](std::size_t job) {
    const int s = static_cast<int>(job / static_cast<std::size_t>(cfg.trials));
    const int t = static_cast<int>(job % static_cast<std::size_t>(cfg.trials));
    const double sigma = cfg.sigma_grid[static_cast<std::size_t>(s)];
    const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(t)});
    const auto inst = gen_synthetic({cfg.dims, cfg.betas, sigma, seed, true});
    const double optimistic = optimistic_error(sigma, R, cfg.dims, fro_norm(inst.truth), K);
    auto& rows = per_job[job];
    auto emit = [&](Method m, int li, double lambda, const Tensor& est, int iters, bool conv, double secs) {
      DenoiseRecord rec;
      rec.sigma_index = s;
      rec.sigma = sigma;
      rec.method = m;
      rec.lambda_index = li;
      rec.lambda = lambda;
      rec.trial = t;
      rec.seed = seed;
      rec.relative_error = relative_error(est, inst.truth);
      rec.iterations = iters;
      rec.converged = conv;
      rec.optimistic = optimistic;
      rec.wall_time = secs;
      rows.push_back(rec);
    };

    std::optional<SubspaceBases> bases;
    auto subspace_bases = [&]() -> const SubspaceBases& {
      if (!bases) bases = build_bases(inst.observed, cfg.H);
      return *bases;
    };

    for (Method m : cfg.methods) {
      if (m == Method::SubspaceTheory) continue;
      if (m == Method::Cp) {
        for (std::size_t li = 0; li < cfg.cp_l2_grid.size(); ++li) {
          const auto start = std::chrono::steady_clock::now();
          CpOptions opts = cfg.cp;
          opts.l2_reg = cfg.cp_l2_grid[li];
          const auto fit = cp_als(inst.observed, cfg.H, cfg.cp_inits, derive_seed(seed, {0xC0FFEEu, li}), opts);
          emit(m, static_cast<int>(li), opts.l2_reg, cp_reconstruct(fit.model), fit.model.sweeps,
               fit.model.sweeps < opts.max_sweeps, detail::seconds_since(start));
        }
        continue;
      }
      for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
        const double lambda = cfg.lambda_grid[li];
        const auto start = std::chrono::steady_clock::now();
        if (m == Method::Subspace) {
          const auto res = admm_denoise(inst.observed, subspace_bases(), lambda, cfg.admm);
          emit(m, static_cast<int>(li), lambda, res.estimate, res.diagnostics.iterations, res.diagnostics.converged,
               detail::seconds_since(start));
        } else if (m == Method::Overlapped) {
          const auto res = overlapped_denoise(inst.observed, lambda, cfg.trace);
          emit(m, static_cast<int>(li), lambda, res.estimate, res.iterations, res.converged,
               detail::seconds_since(start));
        } else {
          const auto res = latent_denoise(inst.observed, lambda, cfg.trace);
          emit(m, static_cast<int>(li), lambda, res.estimate, res.iterations, res.converged,
               detail::seconds_since(start));
        }
      }
    }
    const bool wants_theory =
        cfg.theory_lambda ||
        std::find(cfg.methods.begin(), cfg.methods.end(), Method::SubspaceTheory) != cfg.methods.end();
    if (wants_theory && sigma > 0.0) {
      const double lambda = theoretical_lambda(sigma, cfg.dims, cfg.H);
      const auto start = std::chrono::steady_clock::now();
      const auto res = admm_denoise(inst.observed, subspace_bases(), lambda, cfg.admm);
      emit(Method::SubspaceTheory, 0, lambda, res.estimate, res.diagnostics.iterations, res.diagnostics.converged,
           detail::seconds_since(start));
    }
  });

  std::vector<DenoiseRecord> out;
  for (auto& rows : per_job) out.insert(out.end(), rows.begin(), rows.end());
  std::stable_sort(out.begin(), out.end(), [](const DenoiseRecord& a, const DenoiseRecord& b) {
    return std::tuple(a.sigma_index, static_cast<int>(a.method), a.lambda_index, a.trial) <
           std::tuple(b.sigma_index, static_cast<int>(b.method), b.lambda_index, b.trial);
  });
  return out;
}

inline void write_csv(std::ostream& out, const std::vector<DenoiseRecord>& records, const DenoiseSweepConfig& cfg,
                      bool include_timing = false) {
  std::vector<std::string> header{"dims",   "betas", "H",    "sigma_index",    "sigma",      "method",
                                  "lambda_index", "lambda", "trial", "seed", "relative_error", "iterations",
                                  "converged",    "optimistic_error"};
  if (include_timing) header.push_back("wall_time");
  write_csv_header(out, header);
  const std::string dims = join_values(cfg.dims);
  const std::string betas = join_values(cfg.betas);
  for (const auto& r : records) {
    CsvRow row;
    row.add(dims)
        .add(betas)
        .add(static_cast<std::int64_t>(cfg.H))
        .add(r.sigma_index)
        .add(r.sigma)
        .add(method_name(r.method))
        .add(r.lambda_index)
        .add(r.lambda)
        .add(r.trial)
        .add(r.seed)
        .add(r.relative_error)
        .add(r.iterations)
        .add(r.converged)
        .add(r.optimistic);
    if (include_timing) row.add(r.wall_time);
    write_csv_line(out, row.fields());
  }
}

// ---------------------------------------------------------------------------
// Summaries used by the acceptance checks and the CLI.

/// Mean of `value` grouped by `key`, keys ascending.
template <class Record, class KeyFn, class ValueFn>
std::vector<std::pair<double, double>> mean_by(const std::vector<Record>& records, KeyFn key, ValueFn value) {
  std::map<double, std::pair<double, int>> acc;
  for (const auto& r : records) {
    auto& slot = acc[key(r)];
    slot.first += value(r);
    slot.second += 1;
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [k, v] : acc) out.emplace_back(k, v.first / v.second);
  return out;
}

/// First abscissa at which the curve crosses `level`, interpolated linearly in
/// log(x). Returns nullopt if it never crosses.
inline std::optional<double> log_crossing(const std::vector<std::pair<double, double>>& curve, double level) {
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const auto [x0, y0] = curve[i - 1];
    const auto [x1, y1] = curve[i];
    if ((y0 - level) * (y1 - level) <= 0.0 && y0 != y1) {
      const double f = (level - y0) / (y1 - y0);
      return std::exp(std::log(x0) + f * (std::log(x1) - std::log(x0)));
    }
  }
  return std::nullopt;
}

/// Least-squares slope of log(y) against log(x) over points with x in [lo, hi].
inline std::optional<double> loglog_slope(const std::vector<std::pair<double, double>>& curve, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (const auto& [x, y] : curve) {
    if (x < lo || x > hi || !(y > 0.0)) continue;
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++count;
  }
  if (count < 2) return std::nullopt;
  const double denom = count * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (count * sxy - sx * sy) / denom;
}

}  // namespace subnorm

#endif  // SUBNORM_EXPERIMENTS_HPP
