#include "psdk/errors.hpp"
#include "psdk/experiments.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace ex = psdk::experiments;

namespace {

void print_summary(std::ostream& os, const ex::ExperimentConfig& cfg, const ex::RunOutput& out) {
  const auto rows = ex::aggregate(out.records);
  if (cfg.experiment != ex::Experiment::PerturbOrder) os << "method,p,K,M,n,sigma_sq,count,mean_error,median_error\n";
  for (const auto& a : rows) {
    if (cfg.experiment == ex::Experiment::PerturbOrder) break;
    os << a.method << ',' << a.p << ',' << a.K << ',' << a.M << ',' << a.n << ',' << ex::format_double(a.sigma_sq)
       << ',' << a.count << ',' << ex::format_double(a.mean) << ',' << ex::format_double(a.median) << '\n';
  }

  // log-log slope of mean error against the swept variable, per method and sweep
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& a : rows) {
    switch (cfg.experiment) {
      case ex::Experiment::IntrinsicAvg:
        series[a.method + " vs M (p=" + std::to_string(a.p) + ")"].push_back({a.M, a.mean});
        break;
      case ex::Experiment::Dpca:
        if (a.M == cfg.fixed_M) series[a.method + " vs n"].push_back({a.n, a.mean});
        if (a.n == cfg.fixed_n) series[a.method + " vs M"].push_back({a.M, a.mean});
        break;
      case ex::Experiment::ExtrinsicAvg:
        if (a.sigma_sq == cfg.sigma_sq) series[a.method + " vs M"].push_back({a.M, a.mean});
        break;
      case ex::Experiment::PerturbOrder:
        break;
    }
  }
  if (cfg.experiment == ex::Experiment::PerturbOrder) {
    std::map<std::string, std::vector<std::pair<double, double>>> per_instance;
    for (const auto& r : out.records) {
      per_instance[r.method + "#" + std::to_string(r.repetition)].push_back({r.sigma_sq, r.error});
    }
    for (auto& [key, pts] : per_instance) {
      const std::string method = key.substr(0, key.find('#'));
      try {
        series[method + " vs eps (instance slopes)"].push_back({0.0, ex::slope_fit(pts).slope});
      } catch (const psdk::NumericalError&) {
        // exact predictions have zero remainder and no slope
      }
    }
    for (const auto& [name, slopes] : series) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& s : slopes) {
        lo = std::min(lo, s.second);
        hi = std::max(hi, s.second);
      }
      os << "slope " << name << ": min " << ex::format_double(lo) << " max " << ex::format_double(hi) << '\n';
    }
    return;
  }
  for (const auto& [name, pts] : series) {
    if (pts.size() < 2) continue;
    try {
      const ex::SlopeFit fit = ex::slope_fit(pts);
      os << "slope " << name << ": " << ex::format_double(fit.slope) << " (r2 " << ex::format_double(fit.r2) << ")\n";
    } catch (const psdk::NumericalError& e) {
      os << "slope " << name << ": n/a (" << e.what() << ")\n";
    }
  }
}

int run_selftest(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : ex::run_selftest(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank covariance averaging experiments"};
  app.set_config("--config", "", "Flat key = value file with run settings");
  app.allow_config_extras(false);

  std::string experiment;
  std::uint64_t seed = 0;
  bool quick = false;
  std::string out_path;
  int threads = 1;
  bool timing = false;
  std::vector<int> p_grid, M_grid, n_grid;
  std::vector<double> sigma_sq_grid, eps_grid;
  int K = 0, fixed_M = 0, fixed_n = 0, n_inner = 0, repetitions = 0;
  double sigma_sq = 0.0;
  std::string index_mode;

  app.add_option("experiment", experiment, "intrinsic-avg, dpca, extrinsic-avg, perturb-order or selftest")->required();
  auto* o_seed = app.add_option("--seed,--master_seed", seed, "Master seed");
  app.add_flag("--quick", quick, "Desk-scale grids");
  auto* o_out = app.add_option("--out,--output_path", out_path, "CSV output file (default stdout)");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* o_timing = app.add_flag("--timing", timing, "Record wall-clock times (output no longer reproducible)");
  auto* o_p = app.add_option("--p", p_grid, "Dimension(s)")->delimiter(',');
  auto* o_K = app.add_option("--K", K, "Rank");
  auto* o_s2 = app.add_option("--sigma_sq", sigma_sq, "Noise variance");
  auto* o_M = app.add_option("--M_grid", M_grid, "Machine / sample counts")->delimiter(',');
  auto* o_n = app.add_option("--n_grid", n_grid, "Per-machine sample sizes")->delimiter(',');
  auto* o_s2g = app.add_option("--sigma_sq_grid", sigma_sq_grid, "Noise variances for the second sweep")->delimiter(',');
  auto* o_eps = app.add_option("--eps_grid", eps_grid, "Perturbation scales")->delimiter(',');
  auto* o_fM = app.add_option("--fixed_M", fixed_M, "M held fixed while another variable is swept");
  auto* o_fn = app.add_option("--fixed_n", fixed_n, "n held fixed while M is swept");
  auto* o_ni = app.add_option("--n_inner", n_inner, "Samples behind each extrinsic covariance");
  auto* o_reps = app.add_option("--repetitions", repetitions, "Monte Carlo repetitions");
  auto* o_im = app.add_option("--index_mode", index_mode, "canonical, find_index_oracle or find_index_machine1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (experiment == "selftest") return run_selftest(seed);

  ex::ExperimentConfig cfg;
  try {
    cfg = ex::default_config(ex::parse_experiment(experiment), quick);
    if (o_seed->count()) cfg.master_seed = seed;
    if (o_out->count()) cfg.output_path = out_path;
    if (o_threads->count()) cfg.threads = threads;
    if (o_timing->count()) cfg.timing = timing;
    if (o_p->count()) cfg.p_grid = p_grid;
    if (o_K->count()) cfg.K = K;
    if (o_s2->count()) cfg.sigma_sq = sigma_sq;
    if (o_M->count()) cfg.M_grid = M_grid;
    if (o_n->count()) cfg.n_grid = n_grid;
    if (o_s2g->count()) cfg.sigma_sq_grid = sigma_sq_grid;
    if (o_eps->count()) cfg.eps_grid = eps_grid;
    if (o_fM->count()) cfg.fixed_M = fixed_M;
    if (o_fn->count()) cfg.fixed_n = fixed_n;
    if (o_ni->count()) cfg.n_inner = n_inner;
    if (o_reps->count()) cfg.repetitions = repetitions;
    if (o_im->count()) cfg.index_mode = ex::parse_index_mode(index_mode);
    ex::validate(cfg);
  } catch (const psdk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }

  std::ofstream file;
  if (!cfg.output_path.empty()) {
    file.open(cfg.output_path, std::ios::binary);
    if (!file) {
      std::cerr << "config error: cannot open " << cfg.output_path << " for writing\n";
      return 1;
    }
  }

  ex::RunOutput out;
  try {
    out = ex::run(cfg);
  } catch (const ex::GridPointError& e) {
    std::cerr << "numerical failure at " << e.what() << '\n';
    return 2;
  } catch (const psdk::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const psdk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }

  for (const auto& f : out.failures) std::cerr << "skipped " << f.grid_point << ": " << f.message << '\n';

  if (file.is_open()) {
    ex::write_csv(file, out.records);
    file.close();
    print_summary(std::cout, cfg, out);
  } else {
    std::cout.sync_with_stdio(false);
    ex::write_csv(std::cout, out.records);
    std::cout.flush();
    print_summary(std::cerr, cfg, out);
  }
  return 0;
}
