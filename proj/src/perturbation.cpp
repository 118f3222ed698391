#include "psdk/perturbation.hpp"

#include "psdk/errors.hpp"
#include "psdk/linalg.hpp"

#include <string>

namespace psdk::perturb {

PartitionedFactor PartitionedFactor::split(const CholFactor& N) {
  const auto p = static_cast<int>(N.entries.rows());
  return PartitionedFactor{linalg::select_rows(N.entries, N.index_set.indices()),
                           linalg::select_rows(N.entries, N.index_set.complement(p)), N.index_set};
}

Matrix PartitionedFactor::assemble() const {
  const auto K = static_cast<int>(R.rows());
  const int p = K + static_cast<int>(B.rows());
  Matrix N(p, R.cols());
  for (int k = 0; k < K; ++k) N.row(index_set[k]) = R.row(k);
  const std::vector<int> rest = index_set.complement(p);
  for (std::size_t r = 0; r < rest.size(); ++r) N.row(rest[r]) = B.row(static_cast<Eigen::Index>(r));
  return N;
}

NoiseSplit NoiseSplit::split(const Matrix& E, const IndexSet& index_set) {
  const auto p = static_cast<int>(E.rows());
  return NoiseSplit{linalg::select_rows(E, index_set.indices()),
                    linalg::select_rows(E, index_set.complement(p)), index_set};
}

Matrix NoiseSplit::assemble() const {
  return PartitionedFactor{E1, E2, index_set}.assemble();
}

Matrix strict_upper(const Matrix& P) {
  if (P.rows() != P.cols()) throw NumericalError(ErrorKind::ShapeMismatch, "strict_upper needs a square matrix");
  Matrix U = Matrix::Zero(P.rows(), P.cols());
  U.triangularView<Eigen::StrictlyUpper>() = P;
  return U;
}

Matrix f_R(const Matrix& R, const Matrix& E) {
  if (R.rows() != R.cols() || E.rows() != R.rows() || E.cols() != R.cols()) {
    throw NumericalError(ErrorKind::ShapeMismatch, "f_R needs K x K operands");
  }
  if (!(R.diagonal().cwiseAbs().minCoeff() > pivot_threshold(R))) {
    throw NumericalError(ErrorKind::Singular, "R is not invertible");
  }
  const Matrix U = strict_upper(R.triangularView<Eigen::Lower>().solve(E));
  return U - U.transpose();
}

LqPrediction predict_lq(const Matrix& R, const Matrix& Q, const Matrix& E) {
  if (Q.rows() != R.rows() || Q.cols() != R.cols()) {
    throw NumericalError(ErrorKind::ShapeMismatch, "predict_lq: Q must match R");
  }
  const Matrix EQt = E * Q.transpose();
  const Matrix F = f_R(R, EQt);
  return LqPrediction{Q + F * Q, R + EQt - R * F};
}

Matrix predict_karcher_factor(const CholFactor& N, std::span<const Matrix> Es) {
  if (Es.empty()) throw NumericalError(ErrorKind::EmptyInput, "predict_karcher_factor needs at least one noise matrix");
  Matrix mean = Matrix::Zero(N.entries.rows(), N.entries.cols());
  for (const Matrix& E : Es) {
    if (E.rows() != mean.rows() || E.cols() != mean.cols()) {
      throw NumericalError(ErrorKind::ShapeMismatch, "noise matrix shape differs from N");
    }
    mean += E;
  }
  mean /= static_cast<double>(Es.size());
  const Matrix R = linalg::select_rows(N.entries, N.index_set.indices());
  const Matrix E1 = linalg::select_rows(mean, N.index_set.indices());
  return N.entries + mean - N.entries * f_R(R, E1);
}

namespace {

void check_spectrum(const FullSpectrum& spectrum, const Matrix& calE, int K) {
  const Eigen::Index p = spectrum.V.rows();
  if (spectrum.V.cols() != p || spectrum.lambda.size() != p || calE.rows() != p || calE.cols() != p) {
    throw NumericalError(ErrorKind::ShapeMismatch, "eigvec_first_order needs the full p x p spectrum");
  }
  if (K < 1 || K > p) throw NumericalError(ErrorKind::ShapeMismatch, "K outside [1, p]");
  if (K < p) {
    const double gap = spectrum.lambda(K - 1) - spectrum.lambda(K);
    if (!(gap > 1e-10 * spectrum.lambda.cwiseAbs().maxCoeff())) {
      throw NumericalError(ErrorKind::ZeroGap, "lambda_K - lambda_K+1 = " + std::to_string(gap));
    }
  }
}

}  // namespace

Matrix eigvec_first_order_term(const FullSpectrum& spectrum, const Matrix& calE, int K) {
  check_spectrum(spectrum, calE, K);
  const Eigen::Index p = spectrum.V.rows();
  const Matrix V = spectrum.V.leftCols(K);
  const Matrix rest = spectrum.V.rightCols(p - K);
  // coefficients c_ij = v_i^T calE v_j for i > K
  const Matrix C = rest.transpose() * (calE * V);
  Matrix scaled = C;
  for (Eigen::Index i = 0; i < p - K; ++i) {
    for (int j = 0; j < K; ++j) scaled(i, j) = C(i, j) / (spectrum.lambda(j) - spectrum.lambda(K + i));
  }
  return rest * scaled;
}

Matrix eigvec_first_order(const FullSpectrum& spectrum, const Matrix& calE, int K) {
  return spectrum.V.leftCols(K) + eigvec_first_order_term(spectrum, calE, K);
}

Matrix aligned_eigvecs(const Matrix& V_hat, const Matrix& V) {
  return V_hat * linalg::procrustes_sign(V_hat.transpose() * V);
}

Matrix qstar_from(const CholFactor& N, const SpectralPair& spec) {
  if (spec.V.rows() != N.entries.rows() || spec.V.cols() != N.entries.cols() ||
      spec.lambda.size() != N.entries.cols()) {
    throw NumericalError(ErrorKind::ShapeMismatch, "qstar_from: spectral pair does not match N");
  }
  if (!(spec.lambda.minCoeff() > 0.0)) {
    throw NumericalError(ErrorKind::NonPositiveSpectrum, "qstar_from needs positive eigenvalues");
  }
  const Matrix Qstar = spec.lambda.cwiseInverse().asDiagonal() * (spec.V.transpose() * N.entries);
  const auto K = Qstar.rows();
  const double defect = max_norm(Qstar.transpose() * Qstar - Matrix::Identity(K, K));
  if (!(defect < 1e-8)) {
    throw NumericalError(ErrorKind::NotOrthogonal, "||Q*^T Q* - I||_max = " + std::to_string(defect));
  }
  return Qstar;
}

Matrix ehat_construct(const Matrix& Sigma_hat, const Matrix& Sigma, int K, const Matrix& Qstar) {
  if (Sigma_hat.rows() != Sigma.rows() || Qstar.rows() != K || Qstar.cols() != K) {
    throw NumericalError(ErrorKind::ShapeMismatch, "ehat_construct operand shapes disagree");
  }
  const SpectralPair full = linalg::sym_eig_full(Sigma);
  if (K < Sigma.rows()) {
    const double gap = full.lambda(K - 1) - full.lambda(K);
    if (!(gap > pivot_threshold(Sigma))) {
      throw NumericalError(ErrorKind::ZeroGap, "Sigma has no gap at K");
    }
  }
  const Matrix V = full.V.leftCols(K);
  const SpectralPair local = linalg::sym_eig_topk(Sigma_hat, K, true);
  const Matrix H_hat = linalg::procrustes_sign(local.V.transpose() * V);
  return Sigma_hat * local.V * H_hat * Qstar - Sigma * V * Qstar;
}

}  // namespace psdk::perturb
