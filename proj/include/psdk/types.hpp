#pragma once

#include <Eigen/Dense>

#include <vector>

namespace psdk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Ordered set of K distinct zero-based row indices selecting the cousin
/// manifold S*_I(p, K). The canonical manifold uses {0, ..., K-1}.
class IndexSet {
 public:
  IndexSet() = default;

  /// Throws NumericalError(InvalidIndexSet) on duplicates or out-of-range rows.
  IndexSet(std::vector<int> indices, int p);

  static IndexSet canonical(int K, int p);

  int size() const noexcept { return static_cast<int>(indices_.size()); }
  int operator[](int k) const { return indices_[static_cast<std::size_t>(k)]; }
  const std::vector<int>& indices() const noexcept { return indices_; }

  /// Rows not in the set, ascending.
  std::vector<int> complement(int p) const;

  bool operator==(const IndexSet& other) const = default;

 private:
  std::vector<int> indices_;
};

/// Reduced Cholesky factor: p x K, mock lower triangular relative to the
/// index set with positive entries at the diagonal positions (I[k], k).
struct CholFactor {
  Matrix entries;
  IndexSet index_set;
};

/// Log-Cholesky coordinates: same support as CholFactor, diagonal positions
/// log-transformed and unconstrained in sign.
struct LogCholFactor {
  Matrix entries;
  IndexSet index_set;
};

/// Rank-K PSD matrix tagged with the index set whose rows are independent.
struct RPsdMatrix {
  Matrix A;
  int rank = 0;
  IndexSet index_set;
};

/// Top-K eigenpairs, eigenvalues descending.
struct SpectralPair {
  Matrix V;
  Vector lambda;
};

/// Scale-aware singularity threshold: 1e-10 times the max-norm of the input.
inline double pivot_threshold(const Matrix& M) {
  const double scale = M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
  return 1e-10 * scale;
}

inline double max_norm(const Matrix& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

}  // namespace psdk
