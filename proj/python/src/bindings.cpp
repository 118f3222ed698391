#include "psdk/dpca.hpp"
#include "psdk/errors.hpp"
#include "psdk/experiments.hpp"
#include "psdk/linalg.hpp"
#include "psdk/manifold.hpp"
#include "psdk/perturbation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace psdk;

namespace {

IndexSet index_set_for(const std::vector<int>& rows, Eigen::Index p) { return IndexSet(rows, static_cast<int>(p)); }

std::vector<RPsdMatrix> tagged(const std::vector<Matrix>& As, int K, const std::vector<int>& rows) {
  std::vector<RPsdMatrix> out;
  for (const Matrix& A : As) out.push_back(RPsdMatrix{A, K, index_set_for(rows, A.rows())});
  return out;
}

std::vector<dpca::LocalSummary> summaries_from(const std::vector<std::pair<Matrix, Vector>>& locals) {
  std::vector<dpca::LocalSummary> out;
  int id = 0;
  for (const auto& [V, lambda] : locals) out.push_back({V, lambda, id++});
  return out;
}

template <class T>
void set_if(const py::dict& d, const char* key, T& field) {
  if (d.contains(key)) field = d[key].cast<T>();
}

py::tuple run_experiment(const std::string& name, bool quick, std::uint64_t seed, int threads, const py::kwargs& kw) {
  experiments::ExperimentConfig cfg = experiments::default_config(experiments::parse_experiment(name), quick);
  cfg.master_seed = seed;
  cfg.threads = threads;
  const py::dict d = kw;
  for (const auto& item : d) {
    static const char* known[] = {"p", "K", "sigma_sq", "M_grid", "n_grid", "sigma_sq_grid", "eps_grid", "fixed_M",
                                  "fixed_n", "n_inner", "repetitions", "index_mode"};
    const std::string key = py::str(item.first);
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("unknown setting '" + key + "'");
    }
  }
  set_if(d, "p", cfg.p_grid);
  set_if(d, "K", cfg.K);
  set_if(d, "sigma_sq", cfg.sigma_sq);
  set_if(d, "M_grid", cfg.M_grid);
  set_if(d, "n_grid", cfg.n_grid);
  set_if(d, "sigma_sq_grid", cfg.sigma_sq_grid);
  set_if(d, "eps_grid", cfg.eps_grid);
  set_if(d, "fixed_M", cfg.fixed_M);
  set_if(d, "fixed_n", cfg.fixed_n);
  set_if(d, "n_inner", cfg.n_inner);
  set_if(d, "repetitions", cfg.repetitions);
  if (d.contains("index_mode")) cfg.index_mode = experiments::parse_index_mode(d["index_mode"].cast<std::string>());

  experiments::RunOutput out;
  {
    py::gil_scoped_release release;
    out = experiments::run(cfg);
  }
  std::ostringstream csv;
  experiments::write_csv(csv, out.records);
  std::vector<std::pair<std::string, std::string>> failures;
  for (const auto& f : out.failures) failures.emplace_back(f.grid_point, f.message);
  return py::make_tuple(csv.str(), failures);
}

}  // namespace

PYBIND11_MODULE(_psdk, m) {
  m.doc() = "Low-rank covariance averaging on the restricted PSD manifold";

  // the module keeps these alive
  static PyObject* numerical = py::exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError).ptr();
  static PyObject* not_in_manifold = py::exception<NotInManifoldError>(m, "NotInManifoldError", numerical).ptr();
  static PyObject* config = py::exception<ConfigError>(m, "ConfigError", PyExc_ValueError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const NotInManifoldError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(not_in_manifold)(e.what());
      exc.attr("offending") = e.offending();
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(not_in_manifold, exc.ptr());
    } catch (const NumericalError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(numerical)(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(numerical, exc.ptr());
    } catch (const ConfigError& e) {
      PyErr_SetString(config, e.what());
    }
  });

  m.def(
      "reduced_cholesky",
      [](const Matrix& A, int K, const std::vector<int>& index_set) {
        return linalg::reduced_cholesky(A, K, index_set_for(index_set, A.rows())).entries;
      },
      py::arg("A"), py::arg("K"), py::arg("index_set"), "Mock lower-triangular N with A = N N^T.");

  m.def(
      "lq_givens",
      [](const Matrix& M, const std::string& order) {
        const auto o = order == "column" ? linalg::GivensOrder::ColumnMajor : linalg::GivensOrder::RowMajor;
        const auto f = linalg::lq_givens(M, o);
        return py::make_tuple(f.R, f.Q);
      },
      py::arg("M"), py::arg("order") = "row", "M = R Q with R lower triangular, positive diagonal.");

  m.def("procrustes_sign", &linalg::procrustes_sign, py::arg("H"));
  m.def("projector_distance", &linalg::projector_distance, py::arg("V1"), py::arg("V2"));

  m.def(
      "membership_check",
      [](const Matrix& A, int K, const std::vector<int>& index_set) {
        const auto r = manifold::membership_check(A, K, index_set_for(index_set, A.rows()));
        py::dict d;
        d["member"] = r.member;
        d["lambda_K"] = r.lambda_K;
        d["lambda_K1"] = r.lambda_K1;
        d["min_chol_pivot"] = r.min_chol_pivot;
        d["tau_pivot"] = r.tau_pivot;
        return d;
      },
      py::arg("A"), py::arg("K"), py::arg("index_set"));

  m.def(
      "log_cholesky",
      [](const Matrix& A, int K, const std::vector<int>& index_set) {
        return manifold::log_cholesky(RPsdMatrix{A, K, index_set_for(index_set, A.rows())}).entries;
      },
      py::arg("A"), py::arg("K"), py::arg("index_set"));

  m.def(
      "karcher_mean",
      [](const std::vector<Matrix>& As, int K, const std::vector<int>& index_set) {
        return manifold::karcher_mean(tagged(As, K, index_set)).A;
      },
      py::arg("As"), py::arg("K"), py::arg("index_set"));

  m.def(
      "geodesic_distance",
      [](const Matrix& A, const Matrix& B, int K, const std::vector<int>& index_set) {
        const IndexSet I = index_set_for(index_set, A.rows());
        return manifold::geodesic_distance(RPsdMatrix{A, K, I}, RPsdMatrix{B, K, I});
      },
      py::arg("A"), py::arg("B"), py::arg("K"), py::arg("index_set"));

  m.def("f_R", &perturb::f_R, py::arg("R"), py::arg("E"));
  m.def(
      "predict_lq",
      [](const Matrix& R, const Matrix& Q, const Matrix& E) {
        const auto p = perturb::predict_lq(R, Q, E);
        return py::make_tuple(p.R, p.Q);
      },
      py::arg("R"), py::arg("Q"), py::arg("E"));

  m.def(
      "find_index",
      [](const Matrix& V, const Vector& lambda, int K) { return dpca::find_index(V, lambda, K).indices(); },
      py::arg("V"), py::arg("lam"), py::arg("K"));
  m.def(
      "full_pca", [](const std::vector<Matrix>& covs, int K) { return dpca::full_pca(covs, K).V_est; },
      py::arg("covariances"), py::arg("K"));
  m.def(
      "lrc_dpca",
      [](const std::vector<std::pair<Matrix, Vector>>& locals, int K, const std::vector<int>& index_set) {
        if (locals.empty()) throw NumericalError(ErrorKind::EmptyInput, "no machine summaries");
        return dpca::lrc_dpca(summaries_from(locals), K, index_set_for(index_set, locals.front().first.rows())).V_est;
      },
      py::arg("summaries"), py::arg("K"), py::arg("index_set"));
  m.def(
      "dpca_fan",
      [](const std::vector<std::pair<Matrix, Vector>>& locals, int K) {
        return dpca::dpca_fan(summaries_from(locals), K).V_est;
      },
      py::arg("summaries"), py::arg("K"));
  m.def(
      "dpca_bw",
      [](const std::vector<std::pair<Matrix, Vector>>& locals, int K) {
        return dpca::dpca_bw(summaries_from(locals), K).V_est;
      },
      py::arg("summaries"), py::arg("K"));

  m.def(
      "slope_fit",
      [](const std::vector<std::pair<double, double>>& points) {
        const auto f = experiments::slope_fit(points);
        return py::make_tuple(f.slope, f.intercept, f.r2);
      },
      py::arg("points"));
  m.def("format_double", &experiments::format_double, py::arg("x"));
  m.def("run_experiment", &run_experiment, py::arg("experiment"), py::arg("quick") = true, py::arg("seed") = 0,
        py::arg("threads") = 1, "Runs an experiment; returns (csv_text, [(grid_point, message), ...]).");
}
