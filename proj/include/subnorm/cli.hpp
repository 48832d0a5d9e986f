#ifndef SUBNORM_CLI_HPP
#define SUBNORM_CLI_HPP

// `subnorm` command line: gen, denoise, phase-matrix, phase-tensor, sweep.
// Each subcommand accepts --config FILE with `key = value` lines (`#`
// comments); keys are long option names without dashes and command-line
// flags take precedence. Exit codes: 0 success, 1 runtime failure (I/O,
// malformed input file), 2 usage error, 3 solver non-convergence with --strict.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "subnorm/baselines.hpp"
#include "subnorm/errors.hpp"
#include "subnorm/experiments.hpp"
#include "subnorm/subspace.hpp"
#include "subnorm/tensor_io.hpp"

namespace subnorm {

namespace cli_detail {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Reads `key = value` lines. Blank lines and `#` comments are skipped.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline bool truthy(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("expected a boolean, got '" + v + "'");
}

/// Merges the config file named by --config into the argument list of the
/// selected subcommand. Keys already given on the command line are ignored.
inline std::vector<std::string> merge_config(CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args.front());
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string config;
  std::set<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string name = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    given.insert(name);
    if (name == "config") {
      if (eq != std::string::npos) {
        config = a.substr(eq + 1);
      } else if (i + 1 < args.size()) {
        config = args[i + 1];
      }
    }
  }
  if (config.empty()) return args;
  for (const auto& [key, value] : read_config(config)) {
    if (given.count(key)) continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw UsageError("unknown config key '" + key + "'");
    if (opt->get_type_size_max() == 0) {
      if (truthy(value)) args.push_back("--" + key);
    } else {
      args.push_back("--" + key + "=" + value);
    }
  }
  return args;
}

inline Shape parse_dims(const std::vector<Index>& v) {
  if (v.empty()) throw UsageError("--dims must list at least one dimension");
  if (v.size() > 8) throw UsageError("tensors of order above 8 are not supported");
  return Shape(v.begin(), v.end());
}

// Writes to the named file, or to `fallback` when path is empty.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ParseError("cannot open " + path + " for writing");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

}  // namespace cli_detail

/// Entry point of the `subnorm` tool. Returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Low-rank tensor denoising with the subspace norm", "subnorm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  int threads = 1;
  bool strict = false;

  // gen
  std::vector<Index> dims{20, 30, 40};
  std::vector<double> betas{20.0, 10.0};
  double sigma = 0.5;
  std::string truth_path;
  bool gaussian_factors = false;
  auto* gen = app.add_subcommand("gen", "Generate a noisy low-rank tensor (.ten)");
  gen->add_option("--config", config_path, "key = value config file");
  gen->add_option("--dims", dims, "Mode dimensions")->delimiter(',');
  gen->add_option("--betas", betas, "Signal strengths, descending")->delimiter(',');
  gen->add_option("--sigma", sigma, "Noise standard deviation");
  gen->add_option("--seed", seed, "Master seed");
  gen->add_option("--out", out_path, "Observed tensor output (.ten)")->required();
  gen->add_option("--truth", truth_path, "Also write the noiseless tensor here");
  gen->add_flag("--gaussian-factors", gaussian_factors, "Unit-norm Gaussian factors instead of orthonormal");

  // denoise
  std::string in_path;
  std::string method = "subspace";
  Index H = 2;
  double lambda = 1.0;
  double eta = 1.0;
  CLI::Option* den_eta = nullptr;
  CLI::Option* sw_eta = nullptr;
  int max_iter = 2000;
  double tol = -1.0;
  std::string report_path;
  int cp_inits = 20;
  auto* den = app.add_subcommand("denoise", "Denoise a tensor file");
  den->add_option("--config", config_path, "key = value config file");
  den->add_option("--in", in_path, "Input tensor (.ten)")->required();
  den->add_option("--out", out_path, "Estimate output (.ten)")->required();
  den->add_option("--method", method, "subspace | overlapped | latent | cp")
      ->check(CLI::IsMember({"subspace", "overlapped", "latent", "cp"}));
  den->add_option("--H", H, "Subspace dimension (CP rank for --method cp)");
  den->add_option("--lambda", lambda, "Regularization constant (l2 weight for cp)");
  den_eta = den->add_option("--eta", eta, "ADMM augmentation parameter (default: lambda for subspace, 1 otherwise)");
  den->add_option("--max-iter", max_iter, "Iteration cap");
  den->add_option("--tol", tol, "Stopping tolerance (default 1e-6 subspace, 1e-5 trace norms)");
  den->add_option("--truth", truth_path, "Noiseless tensor for reporting relative error");
  den->add_option("--report", report_path, "Diagnostics CSV (default stdout)");
  den->add_option("--cp-inits", cp_inits, "Random restarts for cp");
  den->add_option("--seed", seed, "Seed for cp restarts");
  den->add_flag("--strict", strict, "Exit 3 if the solver does not converge");

  // phase-matrix
  Index n = 100, m = 10000;
  int points = 24;
  double lo = 0.25, hi = 8.0;
  int trials = 10;
  auto* pm = app.add_subcommand("phase-matrix", "Left singular vector recovery sweep for rank-one matrices");
  pm->add_option("--config", config_path, "key = value config file");
  pm->add_option("--n", n, "Rows");
  pm->add_option("--m", m, "Columns (m >= n)");
  pm->add_option("--points", points, "Grid points");
  pm->add_option("--lo", lo, "Lowest SNR as a multiple of (nm)^{1/4}");
  pm->add_option("--hi", hi, "Highest SNR as a multiple of (nm)^{1/4}");
  pm->add_option("--trials", trials, "Trials per grid point");
  pm->add_option("--seed", seed, "Master seed");
  pm->add_option("--threads", threads, "Worker threads");
  pm->add_option("--out", out_path, "CSV output (default stdout)");

  // phase-tensor
  std::vector<double> sigmas;
  auto* pt = app.add_subcommand("phase-tensor", "Mode-1 factor recovery sweep for rank-R tensors");
  pt->add_option("--config", config_path, "key = value config file");
  pt->add_option("--dims", dims, "Mode dimensions")->delimiter(',');
  pt->add_option("--betas", betas, "Signal strengths, descending")->delimiter(',');
  pt->add_option("--points", points, "Grid points");
  pt->add_option("--lo", lo, "Lowest normalized noise sigma (prod n_k)^{1/4}");
  pt->add_option("--hi", hi, "Highest normalized noise sigma (prod n_k)^{1/4}");
  pt->add_option("--sigmas", sigmas, "Explicit sigma grid (overrides --lo/--hi/--points)")->delimiter(',');
  pt->add_option("--trials", trials, "Trials per grid point");
  pt->add_option("--seed", seed, "Master seed");
  pt->add_option("--threads", threads, "Worker threads");
  pt->add_option("--out", out_path, "CSV output (default stdout)");

  // sweep
  std::vector<std::string> methods{"subspace", "overlapped", "latent"};
  double lambda_lo = 1.0, lambda_hi = 100.0;
  int lambda_points = 20;
  double sigma_lo = 0.01, sigma_hi = 10.0;
  int sigma_points = 20;
  double cp_l2_lo = 0.0, cp_l2_hi = 0.0;
  int cp_l2_points = 1;
  bool no_theory = false;
  bool timing = false;
  auto* sw = app.add_subcommand("sweep", "Denoising error over noise levels and regularization grids");
  sw->add_option("--config", config_path, "key = value config file");
  sw->add_option("--dims", dims, "Mode dimensions")->delimiter(',');
  sw->add_option("--betas", betas, "Signal strengths, descending")->delimiter(',');
  sw->add_option("--H", H, "Subspace dimension / CP input rank");
  sw->add_option("--methods", methods, "subspace, overlapped, latent, cp")
      ->delimiter(',')
      ->check(CLI::IsMember({"subspace", "overlapped", "latent", "cp"}));
  sw->add_option("--lambda-lo", lambda_lo, "Smallest lambda");
  sw->add_option("--lambda-hi", lambda_hi, "Largest lambda");
  sw->add_option("--lambda-points", lambda_points, "Lambda grid points (log-spaced)");
  sw->add_option("--sigma-lo", sigma_lo, "Smallest sigma");
  sw->add_option("--sigma-hi", sigma_hi, "Largest sigma");
  sw->add_option("--sigma-points", sigma_points, "Sigma grid points (log-spaced)");
  sw->add_option("--sigmas", sigmas, "Explicit sigma grid (overrides the log grid)")->delimiter(',');
  sw->add_option("--cp-inits", cp_inits, "CP random restarts");
  sw->add_option("--cp-l2-lo", cp_l2_lo, "Smallest CP l2 weight (0 disables the grid)");
  sw->add_option("--cp-l2-hi", cp_l2_hi, "Largest CP l2 weight");
  sw->add_option("--cp-l2-points", cp_l2_points, "CP l2 grid points");
  sw_eta = sw->add_option("--eta", eta, "ADMM augmentation parameter (default: lambda for subspace, 1 otherwise)");
  sw->add_option("--max-iter", max_iter, "Iteration cap");
  sw->add_option("--tol", tol, "Stopping tolerance (default 1e-6 subspace, 1e-5 trace norms)");
  sw->add_option("--trials", trials, "Trials per sigma");
  sw->add_option("--seed", seed, "Master seed");
  sw->add_option("--threads", threads, "Worker threads");
  sw->add_flag("--no-theory", no_theory, "Skip the theoretically motivated lambda row");
  sw->add_flag("--timing", timing, "Add a wall_time column (breaks byte-identical reruns)");
  sw->add_flag("--strict", strict, "Exit 3 if any solve does not converge");
  sw->add_option("--out", out_path, "CSV output (default stdout)");

  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);

  try {
    args = merge_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "subnorm: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "subnorm: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen) {
      SyntheticSpec spec{parse_dims(dims), betas, sigma, seed, !gaussian_factors};
      const auto inst = gen_synthetic(spec);
      write_tensor(inst.observed, out_path);
      if (!truth_path.empty()) write_tensor(inst.truth, truth_path);
      return kExitOk;
    }

    if (*den) {
      const Tensor Y = read_tensor(in_path);
      Tensor estimate;
      int iterations = 0;
      bool converged = true;
      double primal = 0.0, dual = 0.0, kkt = 0.0;
      if (method == "subspace") {
        AdmmOptions opts;
        if (den_eta->count()) opts.eta = eta;
        opts.max_iter = max_iter;
        if (tol > 0) opts.tol = tol;
        const auto B = build_bases(Y, H);
        auto res = admm_denoise(Y, B, lambda, opts);
        estimate = std::move(res.estimate);
        iterations = res.diagnostics.iterations;
        converged = res.diagnostics.converged;
        primal = res.diagnostics.primal_residual;
        dual = res.diagnostics.dual_residual;
        kkt = res.diagnostics.kkt_residual;
      } else if (method == "cp") {
        CpOptions opts;
        opts.l2_reg = lambda;
        opts.max_sweeps = max_iter;
        if (tol > 0) opts.tol = tol;
        const auto fit = cp_als(Y, H, cp_inits, seed, opts);
        estimate = cp_reconstruct(fit.model);
        iterations = fit.model.sweeps;
        converged = fit.model.sweeps < opts.max_sweeps;
      } else {
        TraceNormOptions opts;
        if (den_eta->count()) opts.eta = eta;
        opts.max_iter = max_iter;
        if (tol > 0) opts.tol = tol;
        auto res = method == "overlapped" ? overlapped_denoise(Y, lambda, opts) : latent_denoise(Y, lambda, opts);
        estimate = std::move(res.estimate);
        iterations = res.iterations;
        converged = res.converged;
        primal = res.primal_residual;
        dual = res.dual_residual;
      }
      write_tensor(estimate, out_path);

      Output report(report_path, out);
      std::vector<std::string> header{"method", "H", "lambda", "iterations", "converged", "primal_residual",
                                      "dual_residual", "kkt_residual"};
      CsvRow row;
      row.add(method)
          .add(static_cast<std::int64_t>(H))
          .add(lambda)
          .add(iterations)
          .add(converged)
          .add(primal)
          .add(dual)
          .add(kkt);
      if (!truth_path.empty()) {
        header.emplace_back("relative_error");
        row.add(relative_error(estimate, read_tensor(truth_path)));
      }
      write_csv_header(report.get(), header);
      write_csv_line(report.get(), row.fields());
      if (!converged) err << "subnorm: solver did not converge in " << iterations << " iterations\n";
      return strict && !converged ? kExitNotConverged : kExitOk;
    }

    if (*pm) {
      const double thr = std::pow(static_cast<double>(n) * static_cast<double>(m), 0.25);
      const auto records = matrix_phase_sweep(n, m, logspace(lo * thr, hi * thr, points), trials, seed, threads);
      Output o(out_path, out);
      write_csv(o.get(), records);
      return kExitOk;
    }

    if (*pt) {
      const Shape shape = parse_dims(dims);
      std::vector<double> grid = sigmas;
      if (grid.empty()) {
        const double scale = fourth_root_volume(shape);
        for (double t : logspace(lo, hi, points)) grid.push_back(t / scale);
      }
      const auto records = tensor_phase_sweep(shape, betas, grid, trials, seed, threads);
      Output o(out_path, out);
      write_csv(o.get(), records);
      return kExitOk;
    }

    if (*sw) {
      DenoiseSweepConfig cfg;
      cfg.dims = parse_dims(dims);
      cfg.betas = betas;
      cfg.H = H;
      cfg.methods.clear();
      for (const auto& name : methods) cfg.methods.push_back(parse_method(name));
      cfg.lambda_grid = logspace(lambda_lo, lambda_hi, lambda_points);
      cfg.sigma_grid = sigmas.empty() ? logspace(sigma_lo, sigma_hi, sigma_points) : sigmas;
      cfg.trials = trials;
      cfg.seed = seed;
      cfg.theory_lambda = !no_theory;
      cfg.cp_inits = cp_inits;
      cfg.cp_l2_grid = cp_l2_lo > 0.0 ? logspace(cp_l2_lo, cp_l2_hi > 0.0 ? cp_l2_hi : cp_l2_lo, cp_l2_points)
                                      : std::vector<double>{0.0};
      if (sw_eta->count()) {
        cfg.admm.eta = eta;
        cfg.trace.eta = eta;
      }
      cfg.admm.max_iter = max_iter;
      cfg.trace.max_iter = max_iter;
      if (tol > 0) {
        cfg.admm.tol = tol;
        cfg.trace.tol = tol;
      }
      cfg.threads = threads;
      const auto records = denoise_sweep(cfg);
      Output o(out_path, out);
      write_csv(o.get(), records, cfg, timing);
      const bool all_converged =
          std::all_of(records.begin(), records.end(), [](const DenoiseRecord& r) { return r.converged; });
      if (!all_converged) err << "subnorm: some solves did not converge\n";
      return strict && !all_converged ? kExitNotConverged : kExitOk;
    }
  } catch (const ParameterError& e) {
    err << "subnorm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "subnorm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "subnorm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "subnorm: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace subnorm

#endif  // SUBNORM_CLI_HPP
