#pragma once

#include "psdk/types.hpp"

#include <span>

namespace psdk::perturb {

/// N split into the K x K block on the index-set rows (R) and the remaining
/// (p-K) x K rows (B), in complement order.
struct PartitionedFactor {
  Matrix R;
  Matrix B;
  IndexSet index_set;

  static PartitionedFactor split(const CholFactor& N);
  Matrix assemble() const;
};

/// Rows I of a p x K noise matrix (E1) and the remaining rows (E2).
struct NoiseSplit {
  Matrix E1;
  Matrix E2;
  IndexSet index_set;

  static NoiseSplit split(const Matrix& E, const IndexSet& index_set);
  Matrix assemble() const;
};

/// Keeps entries strictly above the diagonal.
Matrix strict_upper(const Matrix& P);

/// U(R^{-1} E) - U(R^{-1} E)^T for lower-triangular R with positive diagonal.
Matrix f_R(const Matrix& R, const Matrix& E);

struct LqPrediction {
  Matrix Q;
  Matrix R;
};

/// First-order LQ factors of R Q + E:
///   Q' = Q + f_R(E Q^T) Q,   R' = R + E Q^T - R f_R(E Q^T).
LqPrediction predict_lq(const Matrix& R, const Matrix& Q, const Matrix& E);

/// First-order reduced Cholesky factor of the Karcher mean of
/// {(N + E^m)(N + E^m)^T}: N + mean(E) - N f_R(mean(E1)).
Matrix predict_karcher_factor(const CholFactor& N, std::span<const Matrix> Es);

/// Full eigendecomposition of Sigma (all p pairs), descending.
struct FullSpectrum {
  Vector lambda;
  Matrix V;
};

/// V + g(calE V) where g(w_1..w_K) = (-G_1 w_1, ..., -G_K w_K) and
/// G_j = sum_{i > K} (lambda_i - lambda_j)^{-1} v_i v_i^T. Throws ZeroGap
/// when lambda_K - lambda_{K+1} <= tau_pivot.
Matrix eigvec_first_order(const FullSpectrum& spectrum, const Matrix& calE, int K);

/// g(calE V) alone.
Matrix eigvec_first_order_term(const FullSpectrum& spectrum, const Matrix& calE, int K);

/// V-hat * sgn(V-hat^T V): the rotation of the perturbed eigenvectors best
/// aligned with V.
Matrix aligned_eigvecs(const Matrix& V_hat, const Matrix& V);

/// Q* = Lambda^{-1} V^T N; throws NotOrthogonal unless ||Q*^T Q* - I||_max < 1e-8.
Matrix qstar_from(const CholFactor& N, const SpectralPair& spec);

/// E-hat = Sigma-hat V-hat H-hat Q* - Sigma V Q*, so that
/// (N + E-hat)(N + E-hat)^T = V-hat Lambda-hat^2 V-hat^T.
Matrix ehat_construct(const Matrix& Sigma_hat, const Matrix& Sigma, int K, const Matrix& Qstar);

}  // namespace psdk::perturb
