#include "psdk/dpca.hpp"

#include "psdk/errors.hpp"
#include "psdk/linalg.hpp"
#include "psdk/manifold.hpp"

#include <string>

namespace psdk::dpca {

namespace {

void check_summaries(std::span<const LocalSummary> summaries, int K) {
  if (summaries.empty()) throw NumericalError(ErrorKind::EmptyInput, "no machine summaries");
  const Eigen::Index p = summaries.front().V.rows();
  for (const LocalSummary& s : summaries) {
    if (s.V.rows() != p || s.V.cols() != K || s.lambda.size() != K) {
      throw NumericalError(ErrorKind::ShapeMismatch, "summary from machine " + std::to_string(s.machine_id) +
                                                         " is not p x K");
    }
  }
}

DpcaResult top_k_of(const Matrix& S, int K, Method method) {
  const SpectralPair full = linalg::sym_eig_full(S);
  DpcaResult out;
  out.V_est = full.V.leftCols(K);
  out.method = method;
  if (K < S.rows()) {
    out.gap_estimate = full.lambda(K - 1) - full.lambda(K);
    out.zero_gap_warning = !(out.gap_estimate > pivot_threshold(S));
  } else {
    out.gap_estimate = full.lambda(K - 1);
  }
  return out;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::Full: return "fpca";
    case Method::Lrc: return "lrc";
    case Method::Fan: return "fan";
    case Method::Bw: return "bw";
  }
  return "unknown";
}

LocalSummary summarize(const Matrix& Sigma_hat, int K, int machine_id) {
  SpectralPair top = linalg::sym_eig_topk(Sigma_hat, K, true);
  return LocalSummary{std::move(top.V), std::move(top.lambda), machine_id};
}

DpcaResult full_pca(std::span<const Matrix> covariances, int K) {
  if (covariances.empty()) throw NumericalError(ErrorKind::EmptyInput, "no covariances");
  Matrix mean = Matrix::Zero(covariances.front().rows(), covariances.front().cols());
  for (const Matrix& S : covariances) {
    if (S.rows() != mean.rows() || S.cols() != mean.cols()) {
      throw NumericalError(ErrorKind::ShapeMismatch, "covariances differ in shape");
    }
    mean += S;
  }
  mean /= static_cast<double>(covariances.size());
  return top_k_of(mean, K, Method::Full);
}

DpcaResult lrc_dpca(std::span<const LocalSummary> summaries, int K, const IndexSet& index_set) {
  check_summaries(summaries, K);
  std::vector<RPsdMatrix> locals;
  locals.reserve(summaries.size());
  for (const LocalSummary& s : summaries) {
    const Matrix T = s.V * s.lambda.asDiagonal();
    Matrix A = T * T.transpose();
    A = 0.5 * (A + A.transpose());
    locals.push_back(RPsdMatrix{std::move(A), K, index_set});
  }

  std::vector<bool> membership(summaries.size(), true);
  RPsdMatrix mean;
  try {
    mean = manifold::karcher_mean(locals);
  } catch (const NotInManifoldError& e) {
    std::vector<int> machines;
    std::string list;
    for (int m : e.offending()) {
      machines.push_back(summaries[static_cast<std::size_t>(m)].machine_id);
      list += (list.empty() ? "" : ",") + std::to_string(machines.back());
    }
    throw NotInManifoldError("local matrices off S*_I(p,K) on machines " + list, std::move(machines));
  }

  DpcaResult out = top_k_of(mean.A, K, Method::Lrc);
  out.index_set_used = index_set;
  out.membership = std::move(membership);
  return out;
}

DpcaResult dpca_fan(std::span<const LocalSummary> summaries, int K) {
  check_summaries(summaries, K);
  const Eigen::Index p = summaries.front().V.rows();
  Matrix mean = Matrix::Zero(p, p);
  for (const LocalSummary& s : summaries) mean.noalias() += s.V * s.V.transpose();
  mean /= static_cast<double>(summaries.size());
  mean = 0.5 * (mean + mean.transpose());
  return top_k_of(mean, K, Method::Fan);
}

DpcaResult dpca_bw(std::span<const LocalSummary> summaries, int K) {
  check_summaries(summaries, K);
  const Eigen::Index p = summaries.front().V.rows();
  Matrix mean = Matrix::Zero(p, p);
  for (const LocalSummary& s : summaries) mean.noalias() += s.V * s.lambda.asDiagonal() * s.V.transpose();
  mean /= static_cast<double>(summaries.size());
  mean = 0.5 * (mean + mean.transpose());
  return top_k_of(mean, K, Method::Bw);
}

RPsdMatrix euclid_rankk_mean(std::span<const RPsdMatrix> As, int K) {
  if (As.empty()) throw NumericalError(ErrorKind::EmptyInput, "euclid_rankk_mean of an empty list");
  Matrix mean = Matrix::Zero(As.front().A.rows(), As.front().A.cols());
  for (const RPsdMatrix& Am : As) {
    if (Am.A.rows() != mean.rows()) throw NumericalError(ErrorKind::ShapeMismatch, "inputs differ in p");
    mean += Am.A;
  }
  mean /= static_cast<double>(As.size());
  mean = 0.5 * (mean + mean.transpose());
  Matrix Ak = linalg::rank_k_approx(mean, K);
  Ak = 0.5 * (Ak + Ak.transpose());
  return RPsdMatrix{std::move(Ak), K, As.front().index_set};
}

double block_sigma_min(const Matrix& T, const IndexSet& index_set) {
  const Matrix block = linalg::select_rows(T, index_set.indices());
  Eigen::JacobiSVD<Matrix> svd(block);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

IndexSet find_index(const Matrix& V, const Vector& lambda, int K) {
  const auto p = static_cast<int>(V.rows());
  if (K < 1 || K > p || V.cols() < K || lambda.size() < K) {
    throw NumericalError(ErrorKind::ShapeMismatch, "find_index needs V p x K and K eigenvalues");
  }
  if (!(lambda.head(K).minCoeff() > 0.0)) {
    throw NumericalError(ErrorKind::NonPositiveSpectrum, "find_index needs positive eigenvalues");
  }
  const Matrix T = V.leftCols(K) * lambda.head(K).asDiagonal();
  const double tau = pivot_threshold(T);

  std::vector<int> chosen;
  std::vector<bool> used(static_cast<std::size_t>(p), false);
  for (int k = 1; k <= K; ++k) {
    int best = -1;
    double best_score = -1.0;
    Matrix Tk(k, k);
    for (int r = 0; r < k - 1; ++r) Tk.row(r) = T.row(chosen[static_cast<std::size_t>(r)]).head(k);
    for (int i = 0; i < p; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      Tk.row(k - 1) = T.row(i).head(k);
      Eigen::JacobiSVD<Matrix> svd(Tk);
      const double score = svd.singularValues()(k - 1);
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    if (!(best_score > tau)) {
      throw NumericalError(ErrorKind::DegenerateRows,
                           "no candidate row keeps sigma_" + std::to_string(k) + " above tau_pivot");
    }
    chosen.push_back(best);
    used[static_cast<std::size_t>(best)] = true;
  }
  return IndexSet(std::move(chosen), p);
}

}  // namespace psdk::dpca
