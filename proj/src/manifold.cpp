#include "psdk/manifold.hpp"

#include "psdk/errors.hpp"
#include "psdk/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace psdk::manifold {

namespace {

void check_factor_shape(const Matrix& N, const IndexSet& index_set) {
  if (N.cols() != index_set.size() || N.cols() == 0 || N.rows() < N.cols()) {
    throw NumericalError(ErrorKind::ShapeMismatch, "factor must be p x K with K = |I| <= p");
  }
  for (int i : index_set.indices()) {
    if (i >= N.rows()) throw NumericalError(ErrorKind::ShapeMismatch, "index set exceeds factor rows");
  }
}

Matrix symmetric_product(const Matrix& N) {
  Matrix A = N * N.transpose();
  return 0.5 * (A + A.transpose());
}

}  // namespace

bool is_mock_lower(const Matrix& N, const IndexSet& index_set) {
  for (int k = 0; k < index_set.size(); ++k) {
    for (Eigen::Index l = k + 1; l < N.cols(); ++l) {
      if (N(index_set[k], l) != 0.0) return false;
    }
  }
  return true;
}

Matrix support_mask(int p, const IndexSet& index_set) {
  const int K = index_set.size();
  Matrix mask = Matrix::Ones(p, K);
  for (int k = 0; k < K; ++k) {
    for (int l = k + 1; l < K; ++l) mask(index_set[k], l) = 0.0;
  }
  return mask;
}

MembershipReport membership_check(const Matrix& A, int K, const IndexSet& index_set) {
  MembershipReport report;
  report.tau_pivot = pivot_threshold(A);
  const auto p = static_cast<int>(A.rows());
  if (A.rows() != A.cols() || K < 1 || K > p || index_set.size() != K) return report;
  for (int i : index_set.indices()) {
    if (i >= p) return report;
  }
  if (max_norm(A - A.transpose()) > 1e-10 * std::max(1.0, max_norm(A))) return report;

  const SpectralPair spec = linalg::sym_eig_full(A);
  report.lambda_K = spec.lambda(K - 1);
  report.lambda_K1 = K < p ? spec.lambda(K) : 0.0;

  Matrix block(K, K);
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) block(a, b) = 0.5 * (A(index_set[a], index_set[b]) + A(index_set[b], index_set[a]));
  double min_pivot = std::numeric_limits<double>::infinity();
  Matrix L = Matrix::Zero(K, K);
  for (int k = 0; k < K; ++k) {
    double pivot = block(k, k);
    for (int j = 0; j < k; ++j) pivot -= L(k, j) * L(k, j);
    min_pivot = std::min(min_pivot, pivot);
    if (!(pivot > 0.0)) break;
    L(k, k) = std::sqrt(pivot);
    for (int i = k + 1; i < K; ++i) {
      double v = block(i, k);
      for (int j = 0; j < k; ++j) v -= L(i, j) * L(k, j);
      L(i, k) = v / L(k, k);
    }
  }
  report.min_chol_pivot = min_pivot;

  const double lam_min = spec.lambda(p - 1);
  const bool psd = lam_min >= -report.tau_pivot;
  const bool rank_ok = report.lambda_K > report.tau_pivot &&
                       std::abs(report.lambda_K1) < kRankGap * report.lambda_K;
  report.member = psd && rank_ok && min_pivot > report.tau_pivot;
  return report;
}

RPsdMatrix make_rpsd(const Matrix& A, int K, const IndexSet& index_set) {
  const MembershipReport r = membership_check(A, K, index_set);
  if (!r.member) {
    throw NumericalError(ErrorKind::NotInManifold,
                         "lambda_K=" + std::to_string(r.lambda_K) + " lambda_K+1=" + std::to_string(r.lambda_K1) +
                             " min pivot=" + std::to_string(r.min_chol_pivot));
  }
  return RPsdMatrix{A, K, index_set};
}

CholFactor map_h(const RPsdMatrix& A) {
  CholFactor N = linalg::reduced_cholesky(A.A, A.rank, A.index_set);
  const double residual = max_norm(A.A - N.entries * N.entries.transpose());
  if (residual > kRankGap * std::max(max_norm(A.A), std::numeric_limits<double>::min())) {
    throw NumericalError(ErrorKind::NotInManifold,
                         "A is not rank " + std::to_string(A.rank) + " PSD (residual " + std::to_string(residual) + ")");
  }
  return N;
}

LogCholFactor map_g(const CholFactor& N) {
  check_factor_shape(N.entries, N.index_set);
  LogCholFactor out{N.entries, N.index_set};
  for (int k = 0; k < N.index_set.size(); ++k) {
    const double d = N.entries(N.index_set[k], k);
    if (!(d > 0.0)) {
      throw NumericalError(ErrorKind::NonPositiveDiagonal, "diagonal position " + std::to_string(k) + " is " +
                                                               std::to_string(d));
    }
    out.entries(N.index_set[k], k) = std::log(d);
  }
  return out;
}

CholFactor map_g_inv(const LogCholFactor& L) {
  check_factor_shape(L.entries, L.index_set);
  CholFactor out{L.entries, L.index_set};
  for (int k = 0; k < L.index_set.size(); ++k) {
    out.entries(L.index_set[k], k) = std::exp(L.entries(L.index_set[k], k));
  }
  return out;
}

RPsdMatrix map_h_inv(const CholFactor& N) {
  check_factor_shape(N.entries, N.index_set);
  return RPsdMatrix{symmetric_product(N.entries), static_cast<int>(N.entries.cols()), N.index_set};
}

LogCholFactor log_cholesky(const RPsdMatrix& A) { return map_g(map_h(A)); }

RPsdMatrix karcher_mean(std::span<const RPsdMatrix> As) {
  if (As.empty()) throw NumericalError(ErrorKind::EmptyInput, "karcher_mean of an empty list");
  const RPsdMatrix& first = As.front();
  Matrix sum = Matrix::Zero(first.A.rows(), first.rank);
  std::vector<int> offending;
  for (std::size_t m = 0; m < As.size(); ++m) {
    const RPsdMatrix& Am = As[m];
    if (Am.A.rows() != first.A.rows() || Am.rank != first.rank) {
      throw NumericalError(ErrorKind::ShapeMismatch, "input " + std::to_string(m) + " differs in (p, K)");
    }
    if (!(Am.index_set == first.index_set)) {
      throw NumericalError(ErrorKind::IndexSetMismatch, "input " + std::to_string(m) + " uses another index set");
    }
    try {
      sum += log_cholesky(Am).entries;
    } catch (const NumericalError& e) {
      if (e.kind() != ErrorKind::NotInManifold) throw;
      offending.push_back(static_cast<int>(m));
    }
  }
  if (!offending.empty()) {
    std::string list;
    for (int m : offending) list += (list.empty() ? "" : ",") + std::to_string(m);
    throw NotInManifoldError("inputs not in S*_I(p,K): " + list, std::move(offending));
  }
  const LogCholFactor mean{sum / static_cast<double>(As.size()), first.index_set};
  return map_h_inv(map_g_inv(mean));
}

double geodesic_distance(const RPsdMatrix& A, const RPsdMatrix& B) {
  if (A.A.rows() != B.A.rows() || A.rank != B.rank) {
    throw NumericalError(ErrorKind::ShapeMismatch, "geodesic_distance operands differ in (p, K)");
  }
  if (!(A.index_set == B.index_set)) {
    throw NumericalError(ErrorKind::IndexSetMismatch, "geodesic_distance operands use different index sets");
  }
  return (log_cholesky(A).entries - log_cholesky(B).entries).norm();
}

double frechet_objective(const RPsdMatrix& center, std::span<const RPsdMatrix> As) {
  double total = 0.0;
  for (const RPsdMatrix& Am : As) {
    const double d = geodesic_distance(center, Am);
    total += d * d;
  }
  return total;
}

}  // namespace psdk::manifold
