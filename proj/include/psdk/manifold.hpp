#pragma once

#include "psdk/types.hpp"

#include <span>

namespace psdk::manifold {

/// Numerical-rank certificate: lambda_{K+1} < kRankGap * lambda_K.
inline constexpr double kRankGap = 1e-6;

struct MembershipReport {
  bool member = false;
  double lambda_K = 0.0;
  double lambda_K1 = 0.0;      // lambda_{K+1}; 0 when K == p
  double min_chol_pivot = 0.0; // smallest Cholesky pivot of A[I,I] (may be <= 0)
  double tau_pivot = 0.0;
};

/// Certifies A in S*_I(p, K): PSD of numerical rank K with A[I,I] nonsingular.
/// Never throws on non-members; returns diagnostics instead.
MembershipReport membership_check(const Matrix& A, int K, const IndexSet& index_set);

/// Validates and tags A. Throws NotInManifold with the diagnostics on failure.
RPsdMatrix make_rpsd(const Matrix& A, int K, const IndexSet& index_set);

/// Reduced Cholesky factor of A relative to its index set. Throws
/// NotInManifold if a pivot is below tau_pivot or A != N N^T.
CholFactor map_h(const RPsdMatrix& A);
CholFactor map_g_inv(const LogCholFactor& L);
LogCholFactor map_g(const CholFactor& N);
RPsdMatrix map_h_inv(const CholFactor& N);

/// Reduced log-Cholesky coordinates g(h(A)).
LogCholFactor log_cholesky(const RPsdMatrix& A);

/// Closed-form Karcher mean: the arithmetic mean in log-Cholesky
/// coordinates mapped back to the manifold.
RPsdMatrix karcher_mean(std::span<const RPsdMatrix> As);

/// ||g(h(A)) - g(h(B))||_F.
double geodesic_distance(const RPsdMatrix& A, const RPsdMatrix& B);

/// Sum of squared geodesic distances from `center` to each point.
double frechet_objective(const RPsdMatrix& center, std::span<const RPsdMatrix> As);

/// True when `N` has the mock-lower-triangular support of its index set.
bool is_mock_lower(const Matrix& N, const IndexSet& index_set);

/// 0/1 mask of the free entries of a p x K mock-lower-triangular factor.
Matrix support_mask(int p, const IndexSet& index_set);

}  // namespace psdk::manifold
