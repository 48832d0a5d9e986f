#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "subnorm/csv.hpp"
#include "subnorm/experiments.hpp"

using namespace subnorm;

namespace {

bool same_entries(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

SyntheticSpec spec_of(Shape dims, std::vector<double> betas, double sigma, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dims = std::move(dims);
  spec.betas = std::move(betas);
  spec.sigma = sigma;
  spec.seed = seed;
  return spec;
}

std::string csv_of(const std::vector<DenoiseRecord>& records, const DenoiseSweepConfig& cfg) {
  std::ostringstream out;
  write_csv(out, records, cfg);
  return out.str();
}

DenoiseSweepConfig small_sweep() {
  DenoiseSweepConfig cfg;
  cfg.dims = {6, 7, 8};
  cfg.betas = {5.0, 3.0};
  cfg.H = 2;
  cfg.methods = {Method::Subspace, Method::Overlapped};
  cfg.lambda_grid = logspace(0.5, 50.0, 4);
  cfg.sigma_grid = {0.1, 0.4};
  cfg.trials = 2;
  cfg.seed = 9;
  cfg.admm.max_iter = 300;
  cfg.trace.max_iter = 300;
  return cfg;
}

}  // namespace

TEST(GenSynthetic, NoiselessObservationEqualsTruth) {
  const auto inst = gen_synthetic(spec_of({5, 6, 7}, {3.0, 1.0}, 0.0, 1));
  EXPECT_TRUE(same_entries(inst.observed, inst.truth));
}

TEST(GenSynthetic, EnergyAndOrthonormalFactors) {
  const auto inst = gen_synthetic(spec_of({20, 30, 40}, {20.0, 10.0}, 0.5, 2));
  EXPECT_NEAR(inner(inst.truth, inst.truth), 500.0, 1e-9 * 500.0);
  ASSERT_EQ(inst.factors.size(), 3u);
  for (const auto& U : inst.factors) {
    EXPECT_EQ(U.cols(), 2);
    EXPECT_LE((U.transpose() * U - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  }
  // The truth is the sum of outer products of the factor columns.
  Tensor rebuilt(inst.truth.shape());
  for (Index r = 0; r < 2; ++r) {
    const std::vector<Vector> cols = {inst.factors[0].col(r), inst.factors[1].col(r), inst.factors[2].col(r)};
    rebuilt += (r == 0 ? 20.0 : 10.0) * outer(cols);
  }
  EXPECT_LE(fro_norm(rebuilt - inst.truth), 1e-12);
  EXPECT_LE(fro_norm(inst.observed - inst.truth - 0.5 * inst.noise), 1e-12);
}

TEST(GenSynthetic, NoiseMoments) {
  const auto inst = gen_synthetic(spec_of({20, 30, 40}, {20.0, 10.0}, 1.0, 3));
  const auto& e = inst.noise.data();
  const double N = static_cast<double>(e.size());
  const double mean = std::accumulate(e.begin(), e.end(), 0.0) / N;
  double var = 0.0;
  for (double x : e) var += (x - mean) * (x - mean);
  var /= N - 1.0;
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(N));
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(GenSynthetic, DeterminedBySeed) {
  const auto a = gen_synthetic(spec_of({5, 6, 7}, {3.0, 1.0}, 0.3, 4));
  const auto b = gen_synthetic(spec_of({5, 6, 7}, {3.0, 1.0}, 0.3, 4));
  const auto c = gen_synthetic(spec_of({5, 6, 7}, {3.0, 1.0}, 0.3, 5));
  EXPECT_TRUE(same_entries(a.observed, b.observed));
  EXPECT_FALSE(same_entries(a.observed, c.observed));
}

TEST(GenSynthetic, GaussianFactorsHaveUnitColumns) {
  auto spec = spec_of({3, 4, 5}, {3.0, 2.0, 1.0, 0.5}, 0.0, 6);
  spec.orthonormal_factors = false;
  const auto inst = gen_synthetic(spec);
  for (const auto& U : inst.factors) {
    for (Index r = 0; r < 4; ++r) EXPECT_NEAR(U.col(r).norm(), 1.0, 1e-12);
  }
}

TEST(GenSynthetic, RejectsInvalidSpecs) {
  EXPECT_THROW(gen_synthetic(spec_of({3, 4, 5}, {3.0, 2.0, 1.0, 0.5}, 0.0, 1)), ParameterError);
  EXPECT_THROW(gen_synthetic(spec_of({3, 4, 5}, {1.0, 2.0}, 0.0, 1)), ParameterError);
  EXPECT_THROW(gen_synthetic(spec_of({3, 4, 5}, {1.0, 0.0}, 0.0, 1)), ParameterError);
  EXPECT_THROW(gen_synthetic(spec_of({3, 4, 5}, {}, 0.0, 1)), ParameterError);
  EXPECT_THROW(gen_synthetic(spec_of({3, 0, 5}, {1.0}, 0.0, 1)), ParameterError);
  EXPECT_THROW(gen_synthetic(spec_of({}, {1.0}, 0.0, 1)), ParameterError);
  EXPECT_THROW(gen_synthetic(spec_of({3, 4, 5}, {1.0}, -0.1, 1)), ParameterError);
}

TEST(RelativeError, Examples) {
  const auto inst = gen_synthetic(spec_of({4, 5, 6}, {2.0}, 0.0, 7));
  EXPECT_EQ(relative_error(inst.truth, inst.truth), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(Tensor(inst.truth.shape()), inst.truth), 1.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0 * inst.truth, inst.truth), 1.0);
  EXPECT_THROW(relative_error(inst.truth, Tensor(inst.truth.shape())), ParameterError);
  EXPECT_THROW(relative_error(Tensor({4, 5, 7}), inst.truth), ShapeError);
}

TEST(Logspace, EndpointsAndRatios) {
  const auto g = logspace(1.0, 100.0, 20);
  ASSERT_EQ(g.size(), 20u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 100.0);
  const double ratio = std::pow(100.0, 1.0 / 19.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], ratio, 1e-12);
  EXPECT_EQ(logspace(3.0, 5.0, 1), std::vector<double>{3.0});
  EXPECT_THROW(logspace(0.0, 1.0, 3), ParameterError);
  EXPECT_THROW(logspace(1.0, 2.0, 0), ParameterError);
}

TEST(DefaultSnrGrid, SpansQuarterToEightTimesThreshold) {
  const auto g = default_snr_grid(100, 10000);
  ASSERT_EQ(g.size(), 24u);
  const double thr = std::pow(1e6, 0.25);
  EXPECT_NEAR(thr, 31.6227766, 1e-6);
  EXPECT_NEAR(g.front(), 0.25 * thr, 1e-12);
  EXPECT_NEAR(g.back(), 8.0 * thr, 1e-12);
}

TEST(MatrixPhaseSweep, RecordLayoutAndSeeds) {
  const std::vector<double> grid{1.0, 10.0, 100.0};
  const auto rec = matrix_phase_sweep(10, 40, grid, 4, 11);
  ASSERT_EQ(rec.size(), 12u);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    EXPECT_EQ(rec[i].grid_index, static_cast<int>(i / 4));
    EXPECT_EQ(rec[i].trial, static_cast<int>(i % 4));
    EXPECT_EQ(rec[i].snr, grid[i / 4]);
    EXPECT_GE(rec[i].abs_inner, 0.0);
    EXPECT_LE(rec[i].abs_inner, 1.0 + 1e-12);
    EXPECT_NEAR(rec[i].dist * rec[i].dist, 2.0 - 2.0 * rec[i].abs_inner, 1e-9);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(rec[i].seed, rec[j].seed);
  }
}

TEST(MatrixPhaseSweep, NullModelLooksLikeARandomCoordinate) {
  const auto rec = matrix_phase_sweep(100, 2000, {1e-12}, 20, 12);
  double mean = 0.0;
  for (const auto& r : rec) mean += r.abs_inner * r.abs_inner;
  mean /= static_cast<double>(rec.size());
  EXPECT_LE(mean, 5.0 / 100.0);
}

TEST(MatrixPhaseSweep, StrongSignalIsRecovered) {
  const auto rec = matrix_phase_sweep(20, 500, {30.0 * std::sqrt(500.0)}, 5, 13);
  for (const auto& r : rec) EXPECT_GE(r.abs_inner, 0.99);
}

TEST(MatrixPhaseSweep, ThreadCountDoesNotChangeOutput) {
  const auto grid = default_snr_grid(15, 60, 6);
  std::ostringstream a, b;
  write_csv(a, matrix_phase_sweep(15, 60, grid, 3, 14, 1));
  write_csv(b, matrix_phase_sweep(15, 60, grid, 3, 14, 4));
  EXPECT_EQ(a.str(), b.str());
}

TEST(MatrixPhaseSweep, RejectsBadArguments) {
  EXPECT_THROW(matrix_phase_sweep(50, 10, {1.0}, 1, 1), ParameterError);
  EXPECT_THROW(matrix_phase_sweep(5, 10, {1.0}, 0, 1), ParameterError);
}

TEST(TensorPhaseSweep, NoiselessFactorsRecovered) {
  const auto rec = tensor_phase_sweep({20, 40, 60}, {20.0, 10.0}, {0.0}, 2, 15);
  ASSERT_EQ(rec.size(), 2u);
  for (const auto& r : rec) {
    ASSERT_EQ(r.abs_inner.size(), 2u);
    EXPECT_GE(r.abs_inner[0], 1.0 - 1e-8);
    EXPECT_GE(r.abs_inner[1], 1.0 - 1e-8);
  }
}

TEST(TensorPhaseSweep, NormalizedAbscissa) {
  EXPECT_NEAR(fourth_root_volume({20, 40, 60}), std::pow(48000.0, 0.25), 1e-12);
  EXPECT_NEAR(fourth_root_volume({20, 40, 60}), 14.80, 5e-3);
  EXPECT_NEAR(20.0 / fourth_root_volume({20, 40, 60}), 1.351, 1e-3);
  EXPECT_NEAR(10.0 / fourth_root_volume({20, 40, 60}), 0.676, 1e-3);
  const auto rec = tensor_phase_sweep({6, 7, 8}, {5.0, 2.0}, {0.1, 0.3}, 1, 16);
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_NEAR(rec[1].normalized_sigma, 0.3 * std::pow(336.0, 0.25), 1e-12);
}

TEST(TensorPhaseSweep, CsvHasOneColumnPerComponent) {
  const auto rec = tensor_phase_sweep({6, 7, 8}, {5.0, 2.0}, {0.1, 0.3}, 2, 17, 2);
  std::ostringstream out;
  write_csv(out, rec);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "dims,betas,grid_index,sigma,normalized_sigma,trial,seed,abs_inner_1,abs_inner_2,threshold_sigma_1,"
            "threshold_sigma_2\r");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST(DenoiseSweep, RowLayout) {
  const auto cfg = small_sweep();
  const auto rec = denoise_sweep(cfg);
  // Per sigma: 2 methods x 4 lambdas x 2 trials + 2 theory rows.
  ASSERT_EQ(rec.size(), 2u * (2u * 4u * 2u + 2u));
  for (std::size_t i = 1; i < rec.size(); ++i) {
    const auto key = [](const DenoiseRecord& r) {
      return std::tuple(r.sigma_index, static_cast<int>(r.method), r.lambda_index, r.trial);
    };
    EXPECT_LT(key(rec[i - 1]), key(rec[i]));
  }
  for (const auto& r : rec) {
    EXPECT_TRUE(std::isfinite(r.relative_error));
    EXPECT_GT(r.iterations, 0);
    EXPECT_NEAR(r.optimistic, optimistic_error(r.sigma, 2, cfg.dims, std::sqrt(34.0), 3), 1e-12);
    if (r.method == Method::SubspaceTheory) {
      EXPECT_NEAR(r.lambda, theoretical_lambda(r.sigma, cfg.dims, 2), 1e-12);
    }
  }
}

TEST(DenoiseSweep, BestLambdaErrorNeverExceedsOne) {
  auto cfg = small_sweep();
  cfg.sigma_grid = {0.1, 1.0, 10.0};
  cfg.lambda_grid = logspace(0.5, 1e4, 5);
  cfg.theory_lambda = false;
  const auto rec = denoise_sweep(cfg);
  for (int s = 0; s < 3; ++s) {
    for (Method m : cfg.methods) {
      for (int t = 0; t < cfg.trials; ++t) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : rec) {
          if (r.sigma_index == s && r.method == m && r.trial == t) best = std::min(best, r.relative_error);
        }
        EXPECT_LE(best, 1.0 + 1e-9) << method_name(m) << " sigma " << cfg.sigma_grid[static_cast<std::size_t>(s)];
      }
    }
  }
}

TEST(DenoiseSweep, LargeNoisePredictsZero) {
  DenoiseSweepConfig cfg;
  cfg.methods = {Method::Subspace};
  cfg.sigma_grid = {5.0};
  cfg.trials = 1;
  cfg.theory_lambda = false;
  const auto rec = denoise_sweep(cfg);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rec) best = std::min(best, r.relative_error);
  EXPECT_NEAR(best, 1.0, 1e-6);
}

TEST(DenoiseSweep, NoiselessSmallestLambdaIsAccurate) {
  DenoiseSweepConfig cfg;
  cfg.methods = {Method::Subspace};
  cfg.lambda_grid = {1.0};
  cfg.sigma_grid = {0.0};
  cfg.trials = 1;
  const auto rec = denoise_sweep(cfg);
  ASSERT_EQ(rec.size(), 1u);
  // Orthogonal factors: every component is shrunk by exactly lambda.
  const double expected = 1.0 * std::sqrt(2.0) / std::sqrt(20.0 * 20.0 + 10.0 * 10.0);
  EXPECT_NEAR(rec[0].relative_error, expected, 1e-3);
}

TEST(DenoiseSweep, CpRowsFollowTheRegularizerGrid) {
  auto cfg = small_sweep();
  cfg.methods = {Method::Cp};
  cfg.cp_l2_grid = {0.001, 0.01, 0.1};
  cfg.cp_inits = 2;
  cfg.theory_lambda = false;
  cfg.sigma_grid = {0.2};
  const auto rec = denoise_sweep(cfg);
  ASSERT_EQ(rec.size(), 3u * 2u);
  for (const auto& r : rec) {
    EXPECT_EQ(r.method, Method::Cp);
    EXPECT_EQ(r.lambda, cfg.cp_l2_grid[static_cast<std::size_t>(r.lambda_index)]);
    EXPECT_LT(r.relative_error, 0.5);
  }
}

TEST(DenoiseSweep, DeterministicAcrossRunsAndThreads) {
  auto cfg = small_sweep();
  cfg.methods = {Method::Subspace, Method::Overlapped, Method::Latent, Method::Cp};
  cfg.cp_inits = 2;
  const std::string once = csv_of(denoise_sweep(cfg), cfg);
  EXPECT_EQ(once, csv_of(denoise_sweep(cfg), cfg));
  cfg.threads = 3;
  EXPECT_EQ(once, csv_of(denoise_sweep(cfg), cfg));
}

TEST(DenoiseSweep, CsvSchema) {
  auto cfg = small_sweep();
  cfg.sigma_grid = {0.1};
  cfg.trials = 1;
  cfg.lambda_grid = {2.0};
  cfg.methods = {Method::Subspace};
  const auto rec = denoise_sweep(cfg);
  std::ostringstream plain, timed;
  write_csv(plain, rec, cfg);
  write_csv(timed, rec, cfg, true);
  const std::string header =
      "dims,betas,H,sigma_index,sigma,method,lambda_index,lambda,trial,seed,relative_error,iterations,converged,"
      "optimistic_error";
  EXPECT_EQ(plain.str().substr(0, header.size() + 2), header + "\r\n");
  EXPECT_EQ(timed.str().substr(0, header.size() + 12), header + ",wall_time\r\n");
  EXPECT_NE(plain.str().find("\r\n6x7x8,5;3,2,0,0.10000000000000001,subspace,0,2,0,"), std::string::npos);
}

TEST(DenoiseSweep, OverSpecifiedRankStaysCloseToTrueRank) {
  DenoiseSweepConfig cfg;
  cfg.methods = {Method::Subspace};
  cfg.sigma_grid = {0.5, 1.0};
  cfg.trials = 1;
  cfg.theory_lambda = false;
  cfg.lambda_grid = logspace(1.0, 1000.0, 20);
  auto best = [](const std::vector<DenoiseRecord>& rec, int s) {
    double b = std::numeric_limits<double>::infinity();
    for (const auto& r : rec) {
      if (r.sigma_index == s) b = std::min(b, r.relative_error);
    }
    return b;
  };
  const auto exact = denoise_sweep(cfg);
  cfg.H = 8;
  const auto over = denoise_sweep(cfg);
  for (int s = 0; s < 2; ++s) EXPECT_LE(best(over, s), 1.5 * best(exact, s)) << "sigma index " << s;
}

TEST(DenoiseSweep, RejectsEmptyInputs) {
  auto cfg = small_sweep();
  cfg.trials = 0;
  EXPECT_THROW(denoise_sweep(cfg), ParameterError);
  cfg = small_sweep();
  cfg.sigma_grid.clear();
  EXPECT_THROW(denoise_sweep(cfg), ParameterError);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::Subspace, Method::SubspaceTheory, Method::Overlapped, Method::Latent, Method::Cp}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("tucker"), ParameterError);
}

TEST(Csv, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(CsvRow::quote("plain"), "plain");
  EXPECT_EQ(CsvRow::quote("a,b"), "\"a,b\"");
  EXPECT_EQ(CsvRow::quote("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(CsvRow::quote("two\nlines"), "\"two\nlines\"");
  CsvRow row;
  row.add("x").add(0.1).add(3).add(true).add(std::uint64_t{18446744073709551615u});
  std::ostringstream out;
  write_csv_line(out, row.fields());
  EXPECT_EQ(out.str(), "x,0.10000000000000001,3,1,18446744073709551615\r\n");
}

TEST(Summaries, MeanByGroupsAndSorts) {
  struct R {
    double x, y;
  };
  const std::vector<R> rs{{2.0, 1.0}, {1.0, 4.0}, {2.0, 3.0}};
  const auto m = mean_by(rs, [](const R& r) { return r.x; }, [](const R& r) { return r.y; });
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], std::make_pair(1.0, 4.0));
  EXPECT_EQ(m[1], std::make_pair(2.0, 2.0));
}

TEST(Summaries, LogCrossingInterpolatesInLogX) {
  const std::vector<std::pair<double, double>> curve{{1.0, 0.9}, {10.0, 0.7}, {100.0, 0.3}, {1000.0, 0.1}};
  const auto x = log_crossing(curve, 0.5);
  ASSERT_TRUE(x.has_value());
  EXPECT_NEAR(*x, std::sqrt(10.0 * 100.0), 1e-9);
  EXPECT_FALSE(log_crossing(curve, 0.05).has_value());
}

TEST(Summaries, LogLogSlopeOfPowerLaw) {
  std::vector<std::pair<double, double>> curve;
  for (double x : logspace(1.0, 1000.0, 12)) curve.emplace_back(x, 7.0 * std::pow(x, -4.0));
  const auto s = loglog_slope(curve, 1.0, 1000.0);
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(*s, -4.0, 1e-10);
  EXPECT_NEAR(*loglog_slope(curve, 10.0, 100.0), -4.0, 1e-10);
  EXPECT_FALSE(loglog_slope(curve, 2000.0, 3000.0).has_value());
}
