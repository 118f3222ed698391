#pragma once

#include "psdk/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace psdk::experiments {

enum class Experiment { IntrinsicAvg, Dpca, ExtrinsicAvg, PerturbOrder };
enum class IndexMode { Canonical, FindIndexOracle, FindIndexMachine1 };

const char* to_string(Experiment e);
const char* to_string(IndexMode m);
/// Accepts both the CLI spelling (intrinsic-avg) and the CSV one (intrinsic_avg).
Experiment parse_experiment(const std::string& s);
IndexMode parse_index_mode(const std::string& s);

/// Every knob of a run. Which fields matter depends on the experiment:
///   intrinsic_avg  p_grid x M_grid at sigma_sq
///   dpca           n_grid at fixed_M, then M_grid at fixed_n
///   extrinsic_avg  M_grid at sigma_sq, then sigma_sq_grid at fixed_M
///   perturb_order  eps_grid; p and K are upper bounds, fixed_M noise
///                  matrices per Karcher instance
struct ExperimentConfig {
  Experiment experiment = Experiment::IntrinsicAvg;
  std::vector<int> p_grid;
  int K = 5;
  double sigma_sq = 1.0;
  std::vector<int> M_grid;
  std::vector<int> n_grid;
  std::vector<double> sigma_sq_grid;
  std::vector<double> eps_grid;
  int fixed_M = 0;
  int fixed_n = 0;
  int n_inner = 2000;
  int repetitions = 20;
  std::uint64_t master_seed = 0;
  IndexMode index_mode = IndexMode::Canonical;
  std::string output_path;
  int threads = 1;
  bool timing = false;  // wall_time_ms is 0 unless set, keeping CSVs reproducible
};

/// Full-scale defaults, or the desk-scale variant (p = 50, 20 repetitions).
ExperimentConfig default_config(Experiment e, bool quick);

/// Throws ConfigError describing the first invalid field.
void validate(const ExperimentConfig& cfg);

struct RunRecord {
  std::string experiment;
  std::string method;
  int p = 0;
  int K = 0;
  int M = 0;
  int n = 0;
  double sigma_sq = 0.0;  // for perturb_order: the noise scale eps
  int repetition = 0;
  std::uint64_t seed = 0;
  double error = 0.0;
  double wall_time_ms = 0.0;
};

/// A grid point whose computation was abandoned and left out of the records.
struct Failure {
  std::string grid_point;
  std::string message;
};

struct RunOutput {
  std::vector<RunRecord> records;
  std::vector<Failure> failures;
};

RunOutput run_intrinsic(const ExperimentConfig& cfg);
RunOutput run_dpca(const ExperimentConfig& cfg);
RunOutput run_extrinsic(const ExperimentConfig& cfg);
RunOutput run_perturb_order(const ExperimentConfig& cfg);
RunOutput run(const ExperimentConfig& cfg);

/// Numerical failure tied to one grid point (CLI exit code 2).
class GridPointError : public std::runtime_error {
 public:
  GridPointError(std::string grid_point, const std::string& what)
      : std::runtime_error(grid_point + ": " + what), grid_point_(std::move(grid_point)) {}
  const std::string& grid_point() const noexcept { return grid_point_; }

 private:
  std::string grid_point_;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of log y on log x. Throws InsufficientPoints for
/// fewer than two points or fewer than two distinct x.
SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points);

/// Mean and median of the error over repetitions for one configuration.
struct Aggregate {
  std::string method;
  int p = 0;
  int K = 0;
  int M = 0;
  int n = 0;
  double sigma_sq = 0.0;
  int count = 0;
  double mean = 0.0;
  double median = 0.0;
};

/// Groups by (method, p, K, M, n, sigma_sq) in order of first appearance.
std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records);

inline constexpr const char* kCsvHeader = "experiment,method,p,K,M,n,sigma_sq,repetition,seed,error,wall_time_ms";

/// printf %.17g: 17 significant digits, enough to round-trip any double.
std::string format_double(double x);
void write_csv(std::ostream& out, const std::vector<RunRecord>& records);

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Small end-to-end consistency battery used by `psdk selftest`.
std::vector<SelftestResult> run_selftest(std::uint64_t seed);

}  // namespace psdk::experiments
