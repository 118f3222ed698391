#include "psdk/linalg.hpp"

#include "psdk/errors.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace psdk {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotInManifold: return "NotInManifold";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::NonPositiveSpectrum: return "NonPositiveSpectrum";
    case ErrorKind::NonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::IndexSetMismatch: return "IndexSetMismatch";
    case ErrorKind::ZeroGap: return "ZeroGap";
    case ErrorKind::NotOrthogonal: return "NotOrthogonal";
    case ErrorKind::NotPsd: return "NotPsd";
    case ErrorKind::DegenerateRows: return "DegenerateRows";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::InvalidIndexSet: return "InvalidIndexSet";
  }
  return "Unknown";
}

IndexSet::IndexSet(std::vector<int> indices, int p) : indices_(std::move(indices)) {
  std::vector<bool> seen(static_cast<std::size_t>(std::max(p, 0)), false);
  for (int i : indices_) {
    if (i < 0 || i >= p) {
      throw NumericalError(ErrorKind::InvalidIndexSet,
                           "row index " + std::to_string(i) + " outside [0, " + std::to_string(p) + ")");
    }
    if (seen[static_cast<std::size_t>(i)]) {
      throw NumericalError(ErrorKind::InvalidIndexSet, "duplicate row index " + std::to_string(i));
    }
    seen[static_cast<std::size_t>(i)] = true;
  }
}

IndexSet IndexSet::canonical(int K, int p) {
  std::vector<int> idx(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) idx[static_cast<std::size_t>(k)] = k;
  return IndexSet(std::move(idx), p);
}

std::vector<int> IndexSet::complement(int p) const {
  std::vector<bool> in(static_cast<std::size_t>(p), false);
  for (int i : indices_) in[static_cast<std::size_t>(i)] = true;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(p - size()));
  for (int i = 0; i < p; ++i) {
    if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

namespace linalg {

namespace {

std::optional<Matrix> try_cholesky(const Matrix& S, double tau) {
  const Eigen::Index K = S.rows();
  Matrix L = Matrix::Zero(K, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    double pivot = S(k, k);
    for (Eigen::Index j = 0; j < k; ++j) pivot -= L(k, j) * L(k, j);
    if (!(pivot > tau)) return std::nullopt;
    L(k, k) = std::sqrt(pivot);
    for (Eigen::Index i = k + 1; i < K; ++i) {
      double v = S(i, k);
      for (Eigen::Index j = 0; j < k; ++j) v -= L(i, j) * L(k, j);
      L(i, k) = v / L(k, k);
    }
  }
  return L;
}

void apply_rotation(Matrix& R, Matrix& Q, Eigen::Index i, Eigen::Index j) {
  const double a = R(i, i);
  const double b = R(i, j);
  if (b == 0.0) return;
  const double r = std::hypot(a, b);
  const double c = a / r;
  const double s = b / r;
  const Vector ci = R.col(i);
  const Vector cj = R.col(j);
  R.col(i) = c * ci + s * cj;
  R.col(j) = -s * ci + c * cj;
  R(i, j) = 0.0;
  const Eigen::RowVectorXd qi = Q.row(i);
  const Eigen::RowVectorXd qj = Q.row(j);
  Q.row(i) = c * qi + s * qj;
  Q.row(j) = -s * qi + c * qj;
}

}  // namespace

void require_symmetric(const Matrix& A) {
  if (A.rows() != A.cols()) {
    throw NumericalError(ErrorKind::ShapeMismatch, "matrix is not square");
  }
  const double asym = max_norm(A - A.transpose());
  if (asym > 1e-10 * std::max(1.0, max_norm(A))) {
    throw NumericalError(ErrorKind::NotSymmetric, "max|A - A^T| = " + std::to_string(asym));
  }
}

Matrix cholesky_lower(const Matrix& S, double tau) {
  if (S.rows() != S.cols()) throw NumericalError(ErrorKind::ShapeMismatch, "cholesky of non-square block");
  auto L = try_cholesky(S, tau);
  if (!L) throw NumericalError(ErrorKind::Singular, "Cholesky pivot below threshold");
  return *L;
}

Matrix select_rows(const Matrix& M, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = M.row(rows[r]);
  return out;
}

CholFactor reduced_cholesky(const Matrix& A, int K, const IndexSet& index_set) {
  require_symmetric(A);
  const auto p = static_cast<int>(A.rows());
  if (K < 1 || K > p || index_set.size() != K) {
    throw NumericalError(ErrorKind::ShapeMismatch, "index set size must equal K with 1 <= K <= p");
  }
  for (int i : index_set.indices()) {
    if (i >= p) throw NumericalError(ErrorKind::ShapeMismatch, "index set exceeds matrix dimension");
  }

  const Matrix rows_I = select_rows(A, index_set.indices());  // K x p
  Matrix block(K, K);
  for (int k = 0; k < K; ++k) block.col(k) = rows_I.col(index_set[k]);
  block = 0.5 * (block + block.transpose());

  auto L = try_cholesky(block, pivot_threshold(A));
  if (!L) {
    throw NumericalError(ErrorKind::NotInManifold, "A[I,I] has a Cholesky pivot below tau_pivot");
  }

  // N^T = L^{-1} A[I,:]
  Matrix N = L->triangularView<Eigen::Lower>().solve(rows_I).transpose();
  for (int k = 0; k < K; ++k) N.row(index_set[k]) = L->row(k);
  return CholFactor{std::move(N), index_set};
}

LqFactors lq_givens(const Matrix& M, GivensOrder order) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw NumericalError(ErrorKind::ShapeMismatch, "lq_givens needs a non-empty square matrix");
  }
  const Eigen::Index K = M.rows();
  Eigen::JacobiSVD<Matrix> svd(M);
  if (!(svd.singularValues()(K - 1) > pivot_threshold(M))) {
    throw NumericalError(ErrorKind::Singular, "matrix is numerically rank deficient");
  }

  Matrix R = M;
  Matrix Q = Matrix::Identity(K, K);
  if (order == GivensOrder::RowMajor) {
    for (Eigen::Index i = 0; i < K; ++i)
      for (Eigen::Index j = i + 1; j < K; ++j) apply_rotation(R, Q, i, j);
  } else {
    for (Eigen::Index j = 1; j < K; ++j)
      for (Eigen::Index i = 0; i < j; ++i) apply_rotation(R, Q, i, j);
  }

  for (Eigen::Index i = 0; i < K; ++i) {
    if (R(i, i) < 0.0) {
      R.col(i) *= -1.0;
      Q.row(i) *= -1.0;
    }
  }
  R.triangularView<Eigen::StrictlyUpper>().setZero();
  return LqFactors{std::move(R), std::move(Q)};
}

void fix_signs(Matrix& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    const double biggest = V.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      if (std::abs(V(i, j)) >= biggest * (1.0 - 1e-12)) {
        if (V(i, j) < 0.0) V.col(j) *= -1.0;
        break;
      }
    }
  }
}

SpectralPair sym_eig_full(const Matrix& S) {
  require_symmetric(S);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (S + S.transpose()));
  if (solver.info() != Eigen::Success) {
    throw NumericalError(ErrorKind::NonPositiveSpectrum, "symmetric eigensolver did not converge");
  }
  SpectralPair out{solver.eigenvectors().rowwise().reverse(), solver.eigenvalues().reverse()};
  fix_signs(out.V);
  return out;
}

SpectralPair sym_eig_topk(const Matrix& S, int K, bool require_positive) {
  if (K < 1 || K > S.rows()) throw NumericalError(ErrorKind::ShapeMismatch, "K outside [1, p]");
  SpectralPair full = sym_eig_full(S);
  SpectralPair top{full.V.leftCols(K), full.lambda.head(K)};
  if (require_positive && !(top.lambda(K - 1) > pivot_threshold(S))) {
    throw NumericalError(ErrorKind::NonPositiveSpectrum,
                         "lambda_K = " + std::to_string(top.lambda(K - 1)) + " is not positive");
  }
  return top;
}

Matrix procrustes_sign(const Matrix& H) {
  if (H.rows() != H.cols() || H.rows() == 0) {
    throw NumericalError(ErrorKind::ShapeMismatch, "procrustes_sign needs a square matrix");
  }
  Eigen::JacobiSVD<Matrix> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (!(svd.singularValues()(H.rows() - 1) > pivot_threshold(H))) {
    throw NumericalError(ErrorKind::Singular, "sgn(H) undefined for rank-deficient H");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

double projector_distance(const Matrix& V1, const Matrix& V2) {
  if (V1.rows() != V2.rows() || V1.cols() != V2.cols()) {
    throw NumericalError(ErrorKind::ShapeMismatch, "projector_distance operands differ in shape");
  }
  return (V1 * V1.transpose() - V2 * V2.transpose()).norm();
}

Matrix rank_k_approx(const Matrix& S, int K) {
  const SpectralPair top = sym_eig_topk(S, K);
  return top.V * top.lambda.asDiagonal() * top.V.transpose();
}

}  // namespace linalg
}  // namespace psdk
