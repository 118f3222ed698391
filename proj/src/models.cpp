#include "psdk/models.hpp"

#include "psdk/errors.hpp"
#include "psdk/linalg.hpp"
#include "psdk/manifold.hpp"

#include <cmath>
#include <string>

namespace psdk::models {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 RngStream::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

RngStream RngStream::derive(std::initializer_list<std::uint64_t> keys) const {
  std::uint64_t h = splitmix64(stream_id);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return RngStream{master_seed, h};
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix Z(rows, cols);
  // row by row: the first r rows of a larger draw equal an r-row draw
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) Z(i, j) = normal(engine);
  return Z;
}

Signal make_signal(const SignalSpec& spec, const RngStream& rng) {
  if (spec.p < 1 || spec.K < 1 || spec.K > spec.p) {
    throw NumericalError(ErrorKind::ShapeMismatch, "signal needs p >= K >= 1");
  }
  auto engine = rng.engine();
  Signal out;
  if (spec.construction == Construction::GaussianSvd) {
    const Matrix G = standard_normal(spec.p, spec.p, engine);
    Eigen::BDCSVD<Matrix> svd(G, Eigen::ComputeThinU);
    Matrix V = svd.matrixU().leftCols(spec.K);
    linalg::fix_signs(V);
    const Vector lambda = svd.singularValues().head(spec.K);
    Matrix A = V * lambda.asDiagonal() * V.transpose();
    out.matrix = 0.5 * (A + A.transpose());
    out.top = SpectralPair{V, lambda};
  } else {
    const Matrix V = standard_normal(spec.p, spec.K, engine);
    Matrix S = V * V.transpose();
    S = 0.5 * (S + S.transpose());
    S.diagonal().array() += 0.3;
    out.matrix = S;
    out.top = linalg::sym_eig_topk(S, spec.K, true);
  }
  return out;
}

std::vector<Matrix> intrinsic_noise(const RPsdMatrix& A, double sigma, int M, const RngStream& rng) {
  if (sigma < 0.0) throw NumericalError(ErrorKind::ShapeMismatch, "sigma must be nonnegative");
  const auto p = static_cast<int>(A.A.rows());
  const Matrix mask = manifold::support_mask(p, A.index_set);
  auto engine = rng.engine();
  std::vector<Matrix> Es;
  Es.reserve(static_cast<std::size_t>(std::max(M, 0)));
  for (int m = 0; m < M; ++m) {
    Es.push_back(sigma * standard_normal(p, A.rank, engine).cwiseProduct(mask));
  }
  return Es;
}

std::vector<RPsdMatrix> intrinsic_sample(const RPsdMatrix& A, double sigma, int M, const RngStream& rng) {
  const LogCholFactor base = manifold::log_cholesky(A);
  std::vector<RPsdMatrix> out;
  out.reserve(static_cast<std::size_t>(std::max(M, 0)));
  for (const Matrix& E : intrinsic_noise(A, sigma, M, rng)) {
    out.push_back(manifold::map_h_inv(manifold::map_g_inv(LogCholFactor{base.entries + E, A.index_set})));
  }
  return out;
}

std::vector<RPsdMatrix> spn_build(const CholFactor& N, const std::vector<Matrix>& Es) {
  std::vector<RPsdMatrix> out;
  std::vector<int> offending;
  const auto K = static_cast<int>(N.entries.cols());
  for (std::size_t m = 0; m < Es.size(); ++m) {
    if (Es[m].rows() != N.entries.rows() || Es[m].cols() != N.entries.cols()) {
      throw NumericalError(ErrorKind::ShapeMismatch, "noise matrix " + std::to_string(m) + " has the wrong shape");
    }
    const Matrix G = N.entries + Es[m];
    const Matrix block = linalg::select_rows(G, N.index_set.indices());
    Eigen::JacobiSVD<Matrix> svd(block);
    if (!(svd.singularValues()(K - 1) > pivot_threshold(G))) {
      offending.push_back(static_cast<int>(m));
      continue;
    }
    Matrix A = G * G.transpose();
    A = 0.5 * (A + A.transpose());
    out.push_back(RPsdMatrix{std::move(A), K, N.index_set});
  }
  if (!offending.empty()) {
    std::string list;
    for (int m : offending) list += (list.empty() ? "" : ",") + std::to_string(m);
    throw NotInManifoldError("singular index-set block in samples " + list, std::move(offending));
  }
  return out;
}

namespace {

Matrix covariance_root(const Matrix& Sigma) {
  linalg::require_symmetric(Sigma);
  const Eigen::Index p = Sigma.rows();
  Matrix L;
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    const SpectralPair full = linalg::sym_eig_full(Sigma);
    if (full.lambda(p - 1) < -pivot_threshold(Sigma)) {
      throw NumericalError(ErrorKind::NotPsd, "covariance has a negative eigenvalue");
    }
    L = full.V * full.lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  return L;
}

}  // namespace

Matrix gaussian_data(const Matrix& Sigma, int n, std::mt19937_64& engine) {
  const Eigen::Index p = Sigma.rows();
  const Matrix L = covariance_root(Sigma);
  const Matrix Z = standard_normal(n, p, engine);
  return Z * L.transpose();
}

Matrix gaussian_data(const Matrix& Sigma, int n, const RngStream& rng) {
  auto engine = rng.engine();
  return gaussian_data(Sigma, n, engine);
}

Matrix sample_cov(const Matrix& X) {
  if (X.rows() == 0) throw NumericalError(ErrorKind::EmptyInput, "sample_cov of zero samples");
  const Eigen::Index p = X.cols();
  Matrix S = Matrix::Zero(p, p);
  S.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / static_cast<double>(X.rows()));
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
  return S;
}

Matrix wishart_cov(const Matrix& Sigma, int n, std::mt19937_64& engine) {
  const Eigen::Index p = Sigma.rows();
  if (n < 1) throw NumericalError(ErrorKind::EmptyInput, "wishart_cov of zero samples");
  if (n < p) return sample_cov(gaussian_data(Sigma, n, engine));
  const Matrix L = covariance_root(Sigma);
  // Z^T Z = B B^T, B lower triangular with chi-distributed diagonal
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix B = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    std::chi_squared_distribution<double> chi2(static_cast<double>(n - i));
    B(i, i) = std::sqrt(chi2(engine));
    for (Eigen::Index j = 0; j < i; ++j) B(i, j) = normal(engine);
  }
  const Matrix F = L * B.triangularView<Eigen::Lower>();
  Matrix S = Matrix::Zero(p, p);
  S.selfadjointView<Eigen::Lower>().rankUpdate(F, 1.0 / static_cast<double>(n));
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
  return S;
}

std::vector<RPsdMatrix> extrinsic_sample(const RPsdMatrix& A, double sigma_sq, int M, const RngStream& rng,
                                         int n_inner) {
  if (sigma_sq < 0.0) throw NumericalError(ErrorKind::ShapeMismatch, "sigma_sq must be nonnegative");
  if (n_inner < 1) throw NumericalError(ErrorKind::EmptyInput, "n_inner must be positive");
  const std::vector<RPsdMatrix> clean = intrinsic_sample(A, std::sqrt(sigma_sq), M, rng.derive({0}));
  auto engine = rng.derive({1}).engine();
  std::vector<RPsdMatrix> out;
  out.reserve(clean.size());
  for (const RPsdMatrix& Am : clean) {
    Matrix C = Am.A;
    C.diagonal().array() += 0.01;
    const Matrix S = wishart_cov(C, n_inner, engine);
    Matrix Ak = linalg::rank_k_approx(S, A.rank);
    Ak = 0.5 * (Ak + Ak.transpose());
    out.push_back(RPsdMatrix{std::move(Ak), A.rank, A.index_set});
  }
  return out;
}

}  // namespace psdk::models
