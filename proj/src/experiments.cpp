#include "psdk/experiments.hpp"

#include "psdk/dpca.hpp"
#include "psdk/errors.hpp"
#include "psdk/linalg.hpp"
#include "psdk/manifold.hpp"
#include "psdk/models.hpp"
#include "psdk/perturbation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>
#include <tuple>

namespace psdk::experiments {

namespace {

constexpr std::uint64_t kSignalStream = 0xffffffffULL;

// (sweep, grid index, repetition, method) orders the CSV rows.
using SortKey = std::array<int, 4>;

struct JobOutput {
  std::vector<std::pair<SortKey, RunRecord>> rows;
  std::vector<Failure> failures;
};

RunOutput run_jobs(std::size_t count, int threads, const std::function<JobOutput(std::size_t)>& job) {
  std::vector<JobOutput> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        slots[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(std::max<std::size_t>(count, 1))));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::pair<SortKey, RunRecord>> rows;
  RunOutput out;
  for (JobOutput& slot : slots) {
    std::move(slot.rows.begin(), slot.rows.end(), std::back_inserter(rows));
    std::move(slot.failures.begin(), slot.failures.end(), std::back_inserter(out.failures));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  out.records.reserve(rows.size());
  for (auto& r : rows) out.records.push_back(std::move(r.second));
  return out;
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

RunRecord make_record(const ExperimentConfig& cfg, const char* method, int p, int M, int n, double sigma_sq, int rep,
                      double error, double ms) {
  return RunRecord{to_string(cfg.experiment), method, p, cfg.K, M, n, sigma_sq, rep, cfg.master_seed, error, ms};
}

std::string point_label(const char* experiment, int p, int M, int n, double sigma_sq, int rep) {
  return std::string(experiment) + " p=" + std::to_string(p) + " M=" + std::to_string(M) + " n=" + std::to_string(n) +
         " sigma_sq=" + format_double(sigma_sq) + " rep=" + std::to_string(rep);
}

IndexSet model_index_set(const models::Signal& sig, int K, IndexMode mode) {
  const auto p = static_cast<int>(sig.matrix.rows());
  if (mode == IndexMode::Canonical) return IndexSet::canonical(K, p);
  // A = V Lambda V^T factors as (V Lambda^{1/2})(V Lambda^{1/2})^T
  return dpca::find_index(sig.top.V, sig.top.lambda.cwiseSqrt(), K);
}

template <class Fn>
auto at_grid_point(const std::string& label, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw GridPointError(label, e.what());
  }
}

}  // namespace

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::IntrinsicAvg: return "intrinsic_avg";
    case Experiment::Dpca: return "dpca";
    case Experiment::ExtrinsicAvg: return "extrinsic_avg";
    case Experiment::PerturbOrder: return "perturb_order";
  }
  return "unknown";
}

const char* to_string(IndexMode m) {
  switch (m) {
    case IndexMode::Canonical: return "canonical";
    case IndexMode::FindIndexOracle: return "find_index_oracle";
    case IndexMode::FindIndexMachine1: return "find_index_machine1";
  }
  return "unknown";
}

Experiment parse_experiment(const std::string& s) {
  std::string k = s;
  std::replace(k.begin(), k.end(), '-', '_');
  if (k == "intrinsic_avg") return Experiment::IntrinsicAvg;
  if (k == "dpca") return Experiment::Dpca;
  if (k == "extrinsic_avg") return Experiment::ExtrinsicAvg;
  if (k == "perturb_order") return Experiment::PerturbOrder;
  throw ConfigError("unknown experiment '" + s + "'");
}

IndexMode parse_index_mode(const std::string& s) {
  std::string k = s;
  std::replace(k.begin(), k.end(), '-', '_');
  if (k == "canonical") return IndexMode::Canonical;
  if (k == "find_index_oracle") return IndexMode::FindIndexOracle;
  if (k == "find_index_machine1") return IndexMode::FindIndexMachine1;
  throw ConfigError("unknown index_mode '" + s + "'");
}

ExperimentConfig default_config(Experiment e, bool quick) {
  ExperimentConfig cfg;
  cfg.experiment = e;
  cfg.K = 5;
  cfg.repetitions = 20;
  cfg.index_mode = IndexMode::FindIndexOracle;
  switch (e) {
    case Experiment::IntrinsicAvg:
      cfg.p_grid = quick ? std::vector<int>{50} : std::vector<int>{100, 200, 300, 400};
      cfg.sigma_sq = 1.0;
      for (int M = 30; M <= 270; M += 30) cfg.M_grid.push_back(M);
      break;
    case Experiment::Dpca:
      cfg.index_mode = IndexMode::FindIndexMachine1;
      cfg.sigma_sq = 0.0;
      if (quick) {
        cfg.p_grid = {50};
        cfg.fixed_M = 20;
        cfg.n_grid = {500, 1000, 2000, 4000};
        cfg.fixed_n = 1000;
        cfg.M_grid = {10, 20, 40, 80};
      } else {
        cfg.p_grid = {100};
        cfg.fixed_M = 50;
        cfg.n_grid = {500, 1000, 1500, 2000, 2500};
        cfg.fixed_n = 1000;
        cfg.M_grid = {50, 100, 150, 200};
        cfg.repetitions = 100;
      }
      break;
    case Experiment::ExtrinsicAvg:
      cfg.p_grid = quick ? std::vector<int>{50} : std::vector<int>{100};
      cfg.sigma_sq = 0.5;
      if (quick) {
        cfg.M_grid = {100, 400, 1000};
      } else {
        for (int M = 100; M <= 1000; M += 100) cfg.M_grid.push_back(M);
      }
      cfg.fixed_M = 400;
      for (int i = 0; i <= 7; ++i) cfg.sigma_sq_grid.push_back(i / 10.0);
      cfg.n_inner = 2000;
      break;
    case Experiment::PerturbOrder:
      cfg.p_grid = {30};
      cfg.K = 6;
      cfg.eps_grid = {1e-2, 5e-3, 2.5e-3, 1.25e-3};
      cfg.fixed_M = 5;
      cfg.sigma_sq = 0.0;
      break;
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  auto positive = [](const std::vector<int>& grid, const char* name) {
    if (grid.empty()) throw ConfigError(std::string(name) + " must not be empty");
    for (int v : grid) {
      if (v < 1) throw ConfigError(std::string(name) + " entries must be >= 1");
    }
  };
  positive(cfg.p_grid, "p");
  if (cfg.K < 1) throw ConfigError("K must be >= 1");
  for (int p : cfg.p_grid) {
    if (p < cfg.K) throw ConfigError("p must be >= K");
  }
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (!(cfg.sigma_sq >= 0.0)) throw ConfigError("sigma_sq must be >= 0");
  switch (cfg.experiment) {
    case Experiment::IntrinsicAvg:
      positive(cfg.M_grid, "M_grid");
      break;
    case Experiment::Dpca:
      positive(cfg.M_grid, "M_grid");
      positive(cfg.n_grid, "n_grid");
      if (cfg.fixed_M < 1) throw ConfigError("fixed_M must be >= 1");
      if (cfg.fixed_n < 1) throw ConfigError("fixed_n must be >= 1");
      break;
    case Experiment::ExtrinsicAvg:
      positive(cfg.M_grid, "M_grid");
      if (cfg.sigma_sq_grid.empty()) throw ConfigError("sigma_sq_grid must not be empty");
      for (double s : cfg.sigma_sq_grid) {
        if (!(s >= 0.0)) throw ConfigError("sigma_sq_grid entries must be >= 0");
      }
      if (cfg.fixed_M < 1) throw ConfigError("fixed_M must be >= 1");
      if (cfg.n_inner < 1) throw ConfigError("n_inner must be >= 1");
      break;
    case Experiment::PerturbOrder:
      if (cfg.eps_grid.size() < 4) throw ConfigError("eps_grid needs at least 4 points");
      for (double e : cfg.eps_grid) {
        if (!(e > 0.0)) throw ConfigError("eps_grid entries must be > 0");
      }
      if (cfg.fixed_M < 1) throw ConfigError("fixed_M must be >= 1");
      if (cfg.K < 2) throw ConfigError("perturb_order needs K >= 2");
      break;
  }
}

RunOutput run_intrinsic(const ExperimentConfig& cfg) {
  validate(cfg);
  const int reps = cfg.repetitions;
  const int M_max = *std::max_element(cfg.M_grid.begin(), cfg.M_grid.end());
  const models::RngStream base{cfg.master_seed, 0};
  const double sigma = std::sqrt(cfg.sigma_sq);

  auto job = [&](std::size_t j) {
    const int p_idx = static_cast<int>(j) / reps;
    const int rep = static_cast<int>(j) % reps;
    const int p = cfg.p_grid[static_cast<std::size_t>(p_idx)];
    const auto up = static_cast<std::uint64_t>(p);
    const auto urep = static_cast<std::uint64_t>(rep);
    JobOutput out;

    const std::string label = point_label("intrinsic_avg", p, M_max, 0, cfg.sigma_sq, rep);
    const auto [A, samples] = at_grid_point(label, [&] {
      const models::Signal sig =
          models::make_signal({p, cfg.K, cfg.sigma_sq, models::Construction::GaussianSvd}, base.derive({1, up, urep, kSignalStream}));
      RPsdMatrix A = manifold::make_rpsd(sig.matrix, cfg.K, model_index_set(sig, cfg.K, cfg.index_mode));
      auto samples = models::intrinsic_sample(A, sigma, M_max, base.derive({1, up, urep, 1}));
      return std::make_pair(std::move(A), std::move(samples));
    });

    for (std::size_t g = 0; g < cfg.M_grid.size(); ++g) {
      const int M = cfg.M_grid[g];
      const std::span<const RPsdMatrix> prefix(samples.data(), static_cast<std::size_t>(M));
      const std::string here = point_label("intrinsic_avg", p, M, 0, cfg.sigma_sq, rep);
      at_grid_point(here, [&] {
        Stopwatch lrc_clock(cfg.timing);
        const double lrc = (manifold::karcher_mean(prefix).A - A.A).norm();
        const double lrc_ms = lrc_clock.elapsed_ms();
        Stopwatch eu_clock(cfg.timing);
        const double eu = (dpca::euclid_rankk_mean(prefix, cfg.K).A - A.A).norm();
        const double eu_ms = eu_clock.elapsed_ms();
        const int gi = p_idx * static_cast<int>(cfg.M_grid.size()) + static_cast<int>(g);
        out.rows.push_back({{0, gi, rep, 0}, make_record(cfg, "lrc", p, M, 0, cfg.sigma_sq, rep, lrc, lrc_ms)});
        out.rows.push_back({{0, gi, rep, 1}, make_record(cfg, "euclidean", p, M, 0, cfg.sigma_sq, rep, eu, eu_ms)});
        return 0;
      });
    }
    return out;
  };
  return run_jobs(cfg.p_grid.size() * static_cast<std::size_t>(reps), cfg.threads, job);
}

namespace {

// Runs the four estimators on one set of local covariances.
void dpca_point(const ExperimentConfig& cfg, const std::vector<Matrix>& covs, const models::Signal& sig, int p, int n,
                int sweep, int grid_index, int rep, JobOutput& out) {
  const int M = static_cast<int>(covs.size());
  const int K = cfg.K;
  const std::string label = point_label("dpca", p, M, n, 0.0, rep);
  auto emit = [&](dpca::Method method, double err, double ms) {
    out.rows.push_back({{sweep, grid_index, rep, static_cast<int>(method)},
                        make_record(cfg, dpca::method_name(method), p, M, n, 0.0, rep, err, ms)});
  };

  at_grid_point(label, [&] {
    Stopwatch local_clock(cfg.timing);
    std::vector<dpca::LocalSummary> summaries;
    summaries.reserve(covs.size());
    for (int m = 0; m < M; ++m) summaries.push_back(dpca::summarize(covs[static_cast<std::size_t>(m)], K, m));
    const double local_ms = local_clock.elapsed_ms();

    {
      Stopwatch clock(cfg.timing);
      const dpca::DpcaResult r = dpca::full_pca(covs, K);
      emit(dpca::Method::Full, linalg::projector_distance(r.V_est, sig.top.V), clock.elapsed_ms());
    }

    {
      Stopwatch clock(cfg.timing);
      // candidate index sets in the order they are tried
      std::vector<std::function<IndexSet()>> candidates;
      switch (cfg.index_mode) {
        case IndexMode::Canonical:
          candidates.emplace_back([&] { return IndexSet::canonical(K, p); });
          break;
        case IndexMode::FindIndexOracle:
          candidates.emplace_back([&] { return dpca::find_index(sig.top.V, sig.top.lambda, K); });
          for (int m = 0; m < M; ++m) {
            candidates.emplace_back([&, m] {
              const auto& s = summaries[static_cast<std::size_t>(m)];
              return dpca::find_index(s.V, s.lambda, K);
            });
          }
          break;
        case IndexMode::FindIndexMachine1:
          for (int m = 0; m < M; ++m) {
            candidates.emplace_back([&, m] {
              const auto& s = summaries[static_cast<std::size_t>(m)];
              return dpca::find_index(s.V, s.lambda, K);
            });
          }
          break;
      }
      std::string last_error;
      bool done = false;
      for (const auto& make_index : candidates) {
        try {
          const dpca::DpcaResult r = dpca::lrc_dpca(summaries, K, make_index());
          emit(dpca::Method::Lrc, linalg::projector_distance(r.V_est, sig.top.V), clock.elapsed_ms() + local_ms);
          done = true;
          break;
        } catch (const NotInManifoldError& e) {
          last_error = e.what();
        }
      }
      if (!done) out.failures.push_back(Failure{label + " method=lrc", last_error});
    }

    {
      Stopwatch clock(cfg.timing);
      const dpca::DpcaResult r = dpca::dpca_fan(summaries, K);
      emit(dpca::Method::Fan, linalg::projector_distance(r.V_est, sig.top.V), clock.elapsed_ms() + local_ms);
    }
    {
      Stopwatch clock(cfg.timing);
      const dpca::DpcaResult r = dpca::dpca_bw(summaries, K);
      emit(dpca::Method::Bw, linalg::projector_distance(r.V_est, sig.top.V), clock.elapsed_ms() + local_ms);
    }
    return 0;
  });
}

}  // namespace

RunOutput run_dpca(const ExperimentConfig& cfg) {
  validate(cfg);
  const int reps = cfg.repetitions;
  const models::RngStream base{cfg.master_seed, 0};
  const int M_sweep_max = *std::max_element(cfg.M_grid.begin(), cfg.M_grid.end());
  const int n_sweep_max = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
  const int machines = std::max(cfg.fixed_M, M_sweep_max);
  const int n_grid_size = static_cast<int>(cfg.n_grid.size());
  const int M_grid_size = static_cast<int>(cfg.M_grid.size());

  auto job = [&](std::size_t j) {
    const int p_idx = static_cast<int>(j) / reps;
    const int rep = static_cast<int>(j) % reps;
    const int p = cfg.p_grid[static_cast<std::size_t>(p_idx)];
    const auto up = static_cast<std::uint64_t>(p);
    const auto urep = static_cast<std::uint64_t>(rep);
    JobOutput out;

    const models::Signal sig = at_grid_point(point_label("dpca", p, machines, 0, 0.0, rep), [&] {
      return models::make_signal({p, cfg.K, 0.0, models::Construction::Spiked}, base.derive({2, up, urep, kSignalStream}));
    });

    // machine m holds rows drawn from its own stream; smaller n are prefixes
    std::vector<Matrix> data;
    data.reserve(static_cast<std::size_t>(machines));
    for (int m = 0; m < machines; ++m) {
      const int rows = m < cfg.fixed_M ? std::max(n_sweep_max, cfg.fixed_n) : cfg.fixed_n;
      data.push_back(models::gaussian_data(sig.matrix, rows, base.derive({2, up, urep, static_cast<std::uint64_t>(m)})));
    }

    for (int g = 0; g < n_grid_size; ++g) {
      const int n = cfg.n_grid[static_cast<std::size_t>(g)];
      std::vector<Matrix> covs;
      for (int m = 0; m < cfg.fixed_M; ++m) covs.push_back(models::sample_cov(data[static_cast<std::size_t>(m)].topRows(n)));
      dpca_point(cfg, covs, sig, p, n, 0, p_idx * n_grid_size + g, rep, out);
    }
    for (int g = 0; g < M_grid_size; ++g) {
      const int M = cfg.M_grid[static_cast<std::size_t>(g)];
      std::vector<Matrix> covs;
      for (int m = 0; m < M; ++m) covs.push_back(models::sample_cov(data[static_cast<std::size_t>(m)].topRows(cfg.fixed_n)));
      dpca_point(cfg, covs, sig, p, cfg.fixed_n, 1, p_idx * M_grid_size + g, rep, out);
    }
    return out;
  };
  return run_jobs(cfg.p_grid.size() * static_cast<std::size_t>(reps), cfg.threads, job);
}

RunOutput run_extrinsic(const ExperimentConfig& cfg) {
  validate(cfg);
  const int reps = cfg.repetitions;
  const models::RngStream base{cfg.master_seed, 0};
  const int M_max = *std::max_element(cfg.M_grid.begin(), cfg.M_grid.end());
  const int M_grid_size = static_cast<int>(cfg.M_grid.size());
  const int s_grid_size = static_cast<int>(cfg.sigma_sq_grid.size());

  auto job = [&](std::size_t j) {
    const int p_idx = static_cast<int>(j) / reps;
    const int rep = static_cast<int>(j) % reps;
    const int p = cfg.p_grid[static_cast<std::size_t>(p_idx)];
    const auto up = static_cast<std::uint64_t>(p);
    const auto urep = static_cast<std::uint64_t>(rep);
    const models::RngStream noise_stream = base.derive({3, up, urep, 0});
    JobOutput out;

    const RPsdMatrix A = at_grid_point(point_label("extrinsic_avg", p, M_max, cfg.n_inner, cfg.sigma_sq, rep), [&] {
      const models::Signal sig =
          models::make_signal({p, cfg.K, cfg.sigma_sq, models::Construction::GaussianSvd}, base.derive({3, up, urep, kSignalStream}));
      return manifold::make_rpsd(sig.matrix, cfg.K, model_index_set(sig, cfg.K, cfg.index_mode));
    });

    auto evaluate = [&](std::span<const RPsdMatrix> samples, double s2, int sweep, int gi) {
      const int M = static_cast<int>(samples.size());
      const std::string label = point_label("extrinsic_avg", p, M, cfg.n_inner, s2, rep);
      at_grid_point(label, [&] {
        Stopwatch lrc_clock(cfg.timing);
        try {
          const double lrc = (manifold::karcher_mean(samples).A - A.A).norm();
          out.rows.push_back({{sweep, gi, rep, 0},
                              make_record(cfg, "lrc", p, M, cfg.n_inner, s2, rep, lrc, lrc_clock.elapsed_ms())});
        } catch (const NotInManifoldError& e) {
          out.failures.push_back(Failure{label + " method=lrc", e.what()});
        }
        Stopwatch eu_clock(cfg.timing);
        const double eu = (dpca::euclid_rankk_mean(samples, cfg.K).A - A.A).norm();
        out.rows.push_back({{sweep, gi, rep, 1},
                            make_record(cfg, "euclidean", p, M, cfg.n_inner, s2, rep, eu, eu_clock.elapsed_ms())});
        return 0;
      });
    };

    const std::vector<RPsdMatrix> sweep_samples = at_grid_point(
        point_label("extrinsic_avg", p, M_max, cfg.n_inner, cfg.sigma_sq, rep),
        [&] { return models::extrinsic_sample(A, cfg.sigma_sq, M_max, noise_stream, cfg.n_inner); });
    for (int g = 0; g < M_grid_size; ++g) {
      const auto M = static_cast<std::size_t>(cfg.M_grid[static_cast<std::size_t>(g)]);
      evaluate(std::span<const RPsdMatrix>(sweep_samples.data(), M), cfg.sigma_sq, 0, p_idx * M_grid_size + g);
    }

    // same noise stream at every sigma_sq; reuse the first sweep's draws when they coincide
    for (int g = 0; g < s_grid_size; ++g) {
      const double s2 = cfg.sigma_sq_grid[static_cast<std::size_t>(g)];
      const int gi = p_idx * s_grid_size + g;
      if (s2 == cfg.sigma_sq && cfg.fixed_M <= M_max) {
        evaluate(std::span<const RPsdMatrix>(sweep_samples.data(), static_cast<std::size_t>(cfg.fixed_M)), s2, 1, gi);
        continue;
      }
      const std::vector<RPsdMatrix> samples = at_grid_point(
          point_label("extrinsic_avg", p, cfg.fixed_M, cfg.n_inner, s2, rep),
          [&] { return models::extrinsic_sample(A, s2, cfg.fixed_M, noise_stream, cfg.n_inner); });
      evaluate(samples, s2, 1, gi);
    }
    return out;
  };
  return run_jobs(cfg.p_grid.size() * static_cast<std::size_t>(reps), cfg.threads, job);
}

RunOutput run_perturb_order(const ExperimentConfig& cfg) {
  validate(cfg);
  const models::RngStream base{cfg.master_seed, 0};
  const int p_max = cfg.p_grid.front();

  auto job = [&](std::size_t j) {
    const int rep = static_cast<int>(j);
    auto engine = base.derive({4, static_cast<std::uint64_t>(rep)}).engine();
    std::uniform_int_distribution<int> pick_K(2, cfg.K);
    std::uniform_real_distribution<double> unif(1.0, 2.0);
    JobOutput out;

    // LQ instance: R lower triangular with diagonal in [1, 2], Q Haar-like orthogonal
    {
      const int K = pick_K(engine);
      Matrix R = 0.5 * models::standard_normal(K, K, engine);
      R.triangularView<Eigen::StrictlyUpper>().setZero();
      for (int k = 0; k < K; ++k) R(k, k) = unif(engine);
      const Matrix Q = Eigen::HouseholderQR<Matrix>(models::standard_normal(K, K, engine)).householderQ();
      const Matrix Z = models::standard_normal(K, K, engine);
      for (std::size_t g = 0; g < cfg.eps_grid.size(); ++g) {
        const double eps = cfg.eps_grid[g];
        const std::string label = point_label("perturb_order", K, 1, 0, eps, rep) + " method=predict_lq";
        at_grid_point(label, [&] {
          Stopwatch clock(cfg.timing);
          const Matrix E = eps * Z / max_norm(Z);
          const linalg::LqFactors exact = linalg::lq_givens(R * Q + E);
          const perturb::LqPrediction pred = perturb::predict_lq(R, Q, E);
          const double remainder = std::max(max_norm(exact.Q - pred.Q), max_norm(exact.R - pred.R));
          RunRecord rec{to_string(cfg.experiment), "predict_lq", K, K, 1, 0, eps, rep, cfg.master_seed, remainder,
                        clock.elapsed_ms()};
          out.rows.push_back({{0, static_cast<int>(g), rep, 0}, rec});
          return 0;
        });
      }
    }

    // Karcher instance on a random cousin manifold
    {
      const int K = pick_K(engine);
      const int p = std::uniform_int_distribution<int>(std::max(K, 2), std::max(p_max, K))(engine);
      std::vector<int> rows(static_cast<std::size_t>(p));
      std::iota(rows.begin(), rows.end(), 0);
      std::shuffle(rows.begin(), rows.end(), engine);
      rows.resize(static_cast<std::size_t>(K));
      const IndexSet I(rows, p);
      Matrix N = models::standard_normal(p, K, engine).cwiseProduct(manifold::support_mask(p, I));
      for (int k = 0; k < K; ++k) N(I[k], k) = unif(engine);
      const CholFactor factor{N, I};
      std::vector<Matrix> Z;
      double scale = 0.0;
      for (int m = 0; m < cfg.fixed_M; ++m) {
        Z.push_back(models::standard_normal(p, K, engine));
        scale = std::max(scale, max_norm(Z.back()));
      }
      for (std::size_t g = 0; g < cfg.eps_grid.size(); ++g) {
        const double eps = cfg.eps_grid[g];
        const std::string label = point_label("perturb_order", p, cfg.fixed_M, 0, eps, rep) + " method=predict_karcher";
        at_grid_point(label, [&] {
          Stopwatch clock(cfg.timing);
          std::vector<Matrix> Es;
          for (const Matrix& z : Z) Es.push_back((eps / scale) * z);
          const std::vector<RPsdMatrix> As = models::spn_build(factor, Es);
          const Matrix exact = manifold::map_h(manifold::karcher_mean(As)).entries;
          const Matrix pred = perturb::predict_karcher_factor(factor, Es);
          RunRecord rec{to_string(cfg.experiment), "predict_karcher", p, K, cfg.fixed_M, 0, eps, rep, cfg.master_seed,
                        max_norm(exact - pred), clock.elapsed_ms()};
          out.rows.push_back({{1, static_cast<int>(g), rep, 0}, rec});
          return 0;
        });
      }
    }
    return out;
  };
  return run_jobs(static_cast<std::size_t>(cfg.repetitions), cfg.threads, job);
}

RunOutput run(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::IntrinsicAvg: return run_intrinsic(cfg);
    case Experiment::Dpca: return run_dpca(cfg);
    case Experiment::ExtrinsicAvg: return run_extrinsic(cfg);
    case Experiment::PerturbOrder: return run_perturb_order(cfg);
  }
  throw ConfigError("unknown experiment");
}

SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw NumericalError(ErrorKind::InsufficientPoints, "slope_fit needs at least two points");
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) {
      throw NumericalError(ErrorKind::InsufficientPoints, "slope_fit needs positive coordinates");
    }
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw NumericalError(ErrorKind::InsufficientPoints, "slope_fit needs two distinct x values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::string, int, int, int, int, double>;
  std::map<Key, std::size_t> slot;
  std::vector<Aggregate> out;
  std::vector<std::vector<double>> values;
  for (const RunRecord& r : records) {
    const Key key{r.method, r.p, r.K, r.M, r.n, r.sigma_sq};
    auto [it, inserted] = slot.emplace(key, out.size());
    if (inserted) {
      out.push_back(Aggregate{r.method, r.p, r.K, r.M, r.n, r.sigma_sq});
      values.emplace_back();
    }
    values[it->second].push_back(r.error);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<double>& v = values[i];
    out[i].count = static_cast<int>(v.size());
    out[i].mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    out[i].median = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << kCsvHeader << '\n';
  for (const RunRecord& r : records) {
    out << r.experiment << ',' << r.method << ',' << r.p << ',' << r.K << ',' << r.M << ',' << r.n << ','
        << format_double(r.sigma_sq) << ',' << r.repetition << ',' << r.seed << ',' << format_double(r.error) << ','
        << format_double(r.wall_time_ms) << '\n';
  }
}

std::vector<SelftestResult> run_selftest(std::uint64_t seed) {
  std::vector<SelftestResult> results;
  auto check = [&](const std::string& name, auto&& fn) {
    try {
      const auto [ok, detail] = fn();
      results.push_back({name, ok, detail});
    } catch (const std::exception& e) {
      results.push_back({name, false, e.what()});
    }
  };
  auto engine = models::RngStream{seed, 99}.engine();

  check("reduced_cholesky round trip", [&] {
    const int p = 12, K = 4;
    const IndexSet I({7, 2, 9, 0}, p);
    Matrix N = models::standard_normal(p, K, engine).cwiseProduct(manifold::support_mask(p, I));
    for (int k = 0; k < K; ++k) N(I[k], k) = 1.0 + std::abs(N(I[k], k));
    const double err = max_norm(linalg::reduced_cholesky(N * N.transpose(), K, I).entries - N);
    return std::make_pair(err < 1e-8, "max error " + format_double(err));
  });

  check("lq_givens exactness", [&] {
    const Matrix M = models::standard_normal(6, 6, engine);
    const linalg::LqFactors f = linalg::lq_givens(M);
    const double err = std::max(max_norm(f.R * f.Q - M), max_norm(f.Q * f.Q.transpose() - Matrix::Identity(6, 6)));
    return std::make_pair(err < 1e-10, "max error " + format_double(err));
  });

  check("karcher mean minimizes the Frechet objective", [&] {
    const int p = 8, K = 3, M = 5;
    const IndexSet I = IndexSet::canonical(K, p);
    std::vector<RPsdMatrix> As;
    for (int m = 0; m < M; ++m) {
      Matrix L = 0.5 * models::standard_normal(p, K, engine).cwiseProduct(manifold::support_mask(p, I));
      As.push_back(manifold::map_h_inv(manifold::map_g_inv(LogCholFactor{L, I})));
    }
    const RPsdMatrix mean = manifold::karcher_mean(As);
    const double best = manifold::frechet_objective(mean, As);
    const Matrix mask = manifold::support_mask(p, I);
    const LogCholFactor center = manifold::log_cholesky(mean);
    bool ok = true;
    for (int t = 0; t < 50; ++t) {
      const Matrix step = 0.1 * models::standard_normal(p, K, engine).cwiseProduct(mask);
      const RPsdMatrix other = manifold::map_h_inv(manifold::map_g_inv(LogCholFactor{center.entries + step, I}));
      ok = ok && best <= manifold::frechet_objective(other, As) + 1e-9;
    }
    return std::make_pair(ok, "objective " + format_double(best));
  });

  check("E-hat identity", [&] {
    const int p = 20, K = 3;
    const models::Signal sig = models::make_signal({p, K, 0.0, models::Construction::Spiked}, {seed, 7});
    const Matrix Sigma_hat = models::sample_cov(models::gaussian_data(sig.matrix, 500, engine));
    const IndexSet I = dpca::find_index(sig.top.V, sig.top.lambda, K);
    const Matrix T = sig.top.V * sig.top.lambda.asDiagonal();
    const CholFactor N = linalg::reduced_cholesky(T * T.transpose(), K, I);
    const Matrix Qstar = perturb::qstar_from(N, sig.top);
    const Matrix E = perturb::ehat_construct(Sigma_hat, sig.matrix, K, Qstar);
    const SpectralPair local = linalg::sym_eig_topk(Sigma_hat, K, true);
    const Matrix lhs = (N.entries + E) * (N.entries + E).transpose();
    const Matrix rhs = local.V * local.lambda.cwiseAbs2().asDiagonal() * local.V.transpose();
    const double err = max_norm(lhs - rhs);
    return std::make_pair(err < 1e-8, "max error " + format_double(err));
  });

  check("find_index avoids planted zero rows", [&] {
    const int p = 10, K = 3;
    Matrix G = models::standard_normal(p, K, engine);
    G.topRows(K).setZero();
    const Matrix V = Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(p, K);
    const Vector lambda = Vector::LinSpaced(K, 3.0, 1.0);
    const IndexSet I = dpca::find_index(V, lambda, K);
    const double s = dpca::block_sigma_min(V * lambda.asDiagonal(), I);
    return std::make_pair(s > 1e-6, "sigma_K " + format_double(s));
  });

  return results;
}

}  // namespace psdk::experiments
