#include "psdk/errors.hpp"
#include "psdk/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace psdk;
using namespace psdk::experiments;

namespace {

ExperimentConfig tiny(Experiment e) {
  ExperimentConfig cfg = default_config(e, true);
  cfg.repetitions = 2;
  cfg.master_seed = 5;
  switch (e) {
    case Experiment::IntrinsicAvg:
      cfg.p_grid = {12, 15};
      cfg.M_grid = {5, 10};
      break;
    case Experiment::Dpca:
      cfg.p_grid = {15};
      cfg.n_grid = {100, 200};
      cfg.fixed_M = 3;
      cfg.M_grid = {2, 4};
      cfg.fixed_n = 100;
      break;
    case Experiment::ExtrinsicAvg:
      cfg.p_grid = {12};
      cfg.M_grid = {4, 8};
      cfg.fixed_M = 4;
      cfg.sigma_sq_grid = {0.0, 0.5, 0.7};
      cfg.n_inner = 300;
      break;
    case Experiment::PerturbOrder:
      cfg.p_grid = {10};
      cfg.K = 4;
      break;
  }
  return cfg;
}

std::string csv(const RunOutput& out) {
  std::ostringstream os;
  write_csv(os, out.records);
  return os.str();
}

}  // namespace

TEST(Config, ParseNames) {
  EXPECT_EQ(parse_experiment("intrinsic-avg"), Experiment::IntrinsicAvg);
  EXPECT_EQ(parse_experiment("extrinsic_avg"), Experiment::ExtrinsicAvg);
  EXPECT_EQ(parse_experiment("perturb-order"), Experiment::PerturbOrder);
  EXPECT_EQ(parse_index_mode("find-index-machine1"), IndexMode::FindIndexMachine1);
  EXPECT_THROW(parse_experiment("bogus"), ConfigError);
  EXPECT_THROW(parse_index_mode("bogus"), ConfigError);
}

TEST(Config, FullDefaults) {
  const ExperimentConfig ia = default_config(Experiment::IntrinsicAvg, false);
  EXPECT_EQ(ia.p_grid, (std::vector<int>{100, 200, 300, 400}));
  EXPECT_EQ(ia.K, 5);
  EXPECT_EQ(ia.sigma_sq, 1.0);
  EXPECT_EQ(ia.M_grid, (std::vector<int>{30, 60, 90, 120, 150, 180, 210, 240, 270}));
  EXPECT_EQ(ia.repetitions, 20);

  const ExperimentConfig d = default_config(Experiment::Dpca, false);
  EXPECT_EQ(d.p_grid, (std::vector<int>{100}));
  EXPECT_EQ(d.fixed_M, 50);
  EXPECT_EQ(d.n_grid, (std::vector<int>{500, 1000, 1500, 2000, 2500}));
  EXPECT_EQ(d.fixed_n, 1000);
  EXPECT_EQ(d.M_grid, (std::vector<int>{50, 100, 150, 200}));
  EXPECT_EQ(d.repetitions, 100);

  const ExperimentConfig e = default_config(Experiment::ExtrinsicAvg, false);
  EXPECT_EQ(e.p_grid, (std::vector<int>{100}));
  EXPECT_EQ(e.n_inner, 2000);
  EXPECT_EQ(e.sigma_sq, 0.5);
  EXPECT_EQ(e.M_grid.size(), 10u);
  EXPECT_EQ(e.fixed_M, 400);
  EXPECT_EQ(e.sigma_sq_grid.size(), 8u);
}

TEST(Config, QuickDefaultsShrinkP) {
  for (Experiment e : {Experiment::IntrinsicAvg, Experiment::Dpca, Experiment::ExtrinsicAvg}) {
    const ExperimentConfig cfg = default_config(e, true);
    EXPECT_EQ(cfg.p_grid, (std::vector<int>{50}));
    EXPECT_EQ(cfg.repetitions, 20);
  }
}

TEST(Config, ValidationErrors) {
  ExperimentConfig cfg = default_config(Experiment::IntrinsicAvg, true);
  EXPECT_NO_THROW(validate(cfg));
  cfg.repetitions = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = default_config(Experiment::IntrinsicAvg, true);
  cfg.M_grid.clear();
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = default_config(Experiment::IntrinsicAvg, true);
  cfg.p_grid = {3};
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = default_config(Experiment::PerturbOrder, true);
  cfg.eps_grid = {1e-2, 1e-3};
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = default_config(Experiment::ExtrinsicAvg, true);
  cfg.sigma_sq_grid = {-0.1};
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Csv, HeaderAndFormatting) {
  EXPECT_STREQ(kCsvHeader, "experiment,method,p,K,M,n,sigma_sq,repetition,seed,error,wall_time_ms");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(0.0), "0");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  EXPECT_EQ(format_double(2.5e-3), "0.0025000000000000001");
  std::ostringstream os;
  write_csv(os, {RunRecord{"dpca", "lrc", 50, 5, 20, 1000, 0.0, 3, 7, 0.25, 0.0}});
  EXPECT_EQ(os.str(), std::string(kCsvHeader) + "\ndpca,lrc,50,5,20,1000,0,3,7,0.25,0\n");
}

TEST(Aggregate, MeanAndMedian) {
  std::vector<RunRecord> rs;
  for (double e : {1.0, 3.0, 2.0, 10.0}) rs.push_back(RunRecord{"x", "a", 1, 1, 1, 0, 0.0, 0, 0, e, 0.0});
  rs.push_back(RunRecord{"x", "b", 1, 1, 1, 0, 0.0, 0, 0, 5.0, 0.0});
  const auto agg = aggregate(rs);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].method, "a");
  EXPECT_EQ(agg[0].count, 4);
  EXPECT_DOUBLE_EQ(agg[0].mean, 4.0);
  EXPECT_DOUBLE_EQ(agg[0].median, 2.5);
  EXPECT_DOUBLE_EQ(agg[1].median, 5.0);
}

TEST(Runs, IntrinsicRowCountAndErrors) {
  const ExperimentConfig cfg = tiny(Experiment::IntrinsicAvg);
  const RunOutput out = run(cfg);
  EXPECT_TRUE(out.failures.empty());
  EXPECT_EQ(out.records.size(), 2u * 2u * 2u * 2u);
  for (const RunRecord& r : out.records) {
    EXPECT_TRUE(std::isfinite(r.error));
    EXPECT_GE(r.error, 0.0);
    EXPECT_EQ(r.experiment, "intrinsic_avg");
    EXPECT_EQ(r.seed, 5u);
  }
}

TEST(Runs, IntrinsicNoiselessErrorsVanish) {
  ExperimentConfig cfg = tiny(Experiment::IntrinsicAvg);
  cfg.sigma_sq = 0.0;
  for (const RunRecord& r : run(cfg).records) EXPECT_LT(r.error, 1e-8) << r.method;
}

TEST(Runs, DpcaRowCount) {
  const ExperimentConfig cfg = tiny(Experiment::Dpca);
  const RunOutput out = run(cfg);
  EXPECT_EQ(out.records.size() + out.failures.size(), 4u * (2u + 2u) * 2u);
  for (const RunRecord& r : out.records) {
    EXPECT_TRUE(std::isfinite(r.error));
    EXPECT_GE(r.error, 0.0);
  }
}

TEST(Runs, ExtrinsicRowCount) {
  const ExperimentConfig cfg = tiny(Experiment::ExtrinsicAvg);
  const RunOutput out = run(cfg);
  EXPECT_EQ(out.records.size() + out.failures.size(), 2u * (2u + 3u) * 2u);
}

TEST(Runs, PerturbOrderRowCount) {
  const ExperimentConfig cfg = tiny(Experiment::PerturbOrder);
  const RunOutput out = run(cfg);
  EXPECT_EQ(out.records.size(), 2u * 4u * 2u);
}

TEST(Runs, OutputIndependentOfThreadCount) {
  for (Experiment e : {Experiment::IntrinsicAvg, Experiment::Dpca, Experiment::ExtrinsicAvg, Experiment::PerturbOrder}) {
    ExperimentConfig cfg = tiny(e);
    cfg.repetitions = 3;
    const std::string serial = csv(run(cfg));
    cfg.threads = 3;
    EXPECT_EQ(csv(run(cfg)), serial) << to_string(e);
  }
}

TEST(Runs, SeedChangesOutput) {
  ExperimentConfig cfg = tiny(Experiment::Dpca);
  const std::string a = csv(run(cfg));
  cfg.master_seed = 6;
  EXPECT_NE(csv(run(cfg)), a);
}

TEST(Runs, CanonicalIndexModeCompletes) {
  ExperimentConfig cfg = tiny(Experiment::Dpca);
  cfg.index_mode = IndexMode::Canonical;
  EXPECT_NO_THROW(run(cfg));
  cfg.index_mode = IndexMode::FindIndexOracle;
  EXPECT_NO_THROW(run(cfg));
}

TEST(Selftest, AllChecksPass) {
  for (const SelftestResult& r : run_selftest(1)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(SlopeFit, ExactQuadratic) {
  std::vector<std::pair<double, double>> pts;
  for (double x : {0.1, 0.2, 0.4, 0.8, 1.6}) pts.push_back({x, x * x});
  const auto fit = experiments::slope_fit(pts);
  EXPECT_NEAR(fit.slope, 2.0, 1e-9);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
}

TEST(SlopeFit, InsufficientPoints) {
  try {
    experiments::slope_fit({{1.0, 1.0}});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientPoints);
  }
  EXPECT_THROW(experiments::slope_fit({{1.0, 1.0}, {1.0, 2.0}}), NumericalError);
}
