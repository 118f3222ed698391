#pragma once

#include "psdk/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psdk::dpca {

/// What one machine sends to the server: O(pK) numbers.
struct LocalSummary {
  Matrix V;       // p x K orthonormal
  Vector lambda;  // K positive, descending
  int machine_id = 0;
};

enum class Method { Full, Lrc, Fan, Bw };

const char* method_name(Method m);

struct DpcaResult {
  Matrix V_est;
  Method method = Method::Full;
  std::optional<IndexSet> index_set_used;
  std::vector<bool> membership;  // per machine, LRC only
  double gap_estimate = 0.0;     // lambda_K - lambda_{K+1} of the aggregated matrix
  bool zero_gap_warning = false;
};

/// Top-K eigenpairs of a local covariance.
LocalSummary summarize(const Matrix& Sigma_hat, int K, int machine_id);

/// Top-K eigenvectors of the average covariance.
DpcaResult full_pca(std::span<const Matrix> covariances, int K);

/// Karcher mean of V^m (Lambda^m)^2 V^m^T on S*_I(p,K), then its top-K
/// eigenvectors. Throws NotInManifoldError naming the machines whose local
/// matrix leaves the manifold.
DpcaResult lrc_dpca(std::span<const LocalSummary> summaries, int K, const IndexSet& index_set);

/// Projector averaging: top-K eigenvectors of mean V^m V^m^T.
DpcaResult dpca_fan(std::span<const LocalSummary> summaries, int K);

/// Rank-K approximation averaging: top-K eigenvectors of mean V^m Lambda^m V^m^T.
DpcaResult dpca_bw(std::span<const LocalSummary> summaries, int K);

/// Best rank-K approximation of the arithmetic mean, tagged with the first
/// input's index set.
RPsdMatrix euclid_rankk_mean(std::span<const RPsdMatrix> As, int K);

/// Greedy row selection on T = V Lambda: step k picks the unused row that
/// maximizes the smallest singular value of the k x k block
/// T[(I_1..I_{k-1}, i), 1..k]. Ties go to the smallest row.
IndexSet find_index(const Matrix& V, const Vector& lambda, int K);

/// Smallest singular value of T[I, :].
double block_sigma_min(const Matrix& T, const IndexSet& index_set);

}  // namespace psdk::dpca
