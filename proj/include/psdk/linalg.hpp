#pragma once

#include "psdk/types.hpp"

#include <utility>

namespace psdk::linalg {

/// Order in which the strict upper triangle is annihilated by lq_givens.
/// RowMajor is (1,2),...,(1,K),(2,3),...,(K-1,K); ColumnMajor is
/// (1,2),(1,3),(2,3),(1,4),... Both give the same factorization.
enum class GivensOrder { RowMajor, ColumnMajor };

struct LqFactors {
  Matrix R;  // lower triangular, positive diagonal
  Matrix Q;  // orthogonal, R * Q = M
};

/// Throws NotSymmetric when max|A - A^T| exceeds 1e-10 * max|A|.
void require_symmetric(const Matrix& A);

/// Dense Cholesky of a small SPD block with a pivot check against `tau`.
Matrix cholesky_lower(const Matrix& S, double tau);

/// Factor A = N N^T with N mock lower triangular relative to `index_set`.
/// N[I,:] is the Cholesky factor of A[I,I]; the other rows are
/// A[:,I] L^{-T}.
CholFactor reduced_cholesky(const Matrix& A, int K, const IndexSet& index_set);

/// M = R Q by a product of K(K-1)/2 Givens rotations, each acting on a pair
/// of columns of the running R.
LqFactors lq_givens(const Matrix& M, GivensOrder order = GivensOrder::RowMajor);

/// Top-K eigenpairs of a symmetric matrix, eigenvalues descending, each
/// eigenvector's largest-magnitude entry made positive (lowest row wins
/// ties). With `require_positive`, throws NonPositiveSpectrum when
/// lambda_K <= tau_pivot.
SpectralPair sym_eig_topk(const Matrix& S, int K, bool require_positive = false);

/// Full eigendecomposition under the same ordering and sign convention.
SpectralPair sym_eig_full(const Matrix& S);

/// Applies the global eigenvector sign convention in place.
void fix_signs(Matrix& V);

/// sgn(H) = U1 U2^T from the SVD H = U1 Gamma U2^T.
Matrix procrustes_sign(const Matrix& H);

/// ||V1 V1^T - V2 V2^T||_F.
double projector_distance(const Matrix& V1, const Matrix& V2);

/// Best rank-K approximation of a symmetric matrix (truncated eigendecomposition).
Matrix rank_k_approx(const Matrix& S, int K);

/// Rows of `M` listed in `rows`, in order.
Matrix select_rows(const Matrix& M, const std::vector<int>& rows);

}  // namespace psdk::linalg
