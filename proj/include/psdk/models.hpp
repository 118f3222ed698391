#pragma once

#include "psdk/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace psdk::models {

/// A reproducible random stream: the sequence is a pure function of
/// (master_seed, stream_id).
struct RngStream {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  std::mt19937_64 engine() const;

  /// Child stream keyed by a tuple of integers, e.g. (tag, repetition, machine).
  RngStream derive(std::initializer_list<std::uint64_t> keys) const;
};

std::uint64_t splitmix64(std::uint64_t x);

enum class Construction {
  GaussianSvd,  // A = V Lambda V^T from the top-K SVD of a p x p Gaussian matrix
  Spiked,       // Sigma = V V^T + 0.3 I_p with V p x K Gaussian
};

struct SignalSpec {
  int p = 0;
  int K = 0;
  double sigma_sq = 0.0;
  Construction construction = Construction::GaussianSvd;
};

struct Signal {
  Matrix matrix;     // A (GaussianSvd) or Sigma (Spiked)
  SpectralPair top;  // top-K eigenpairs of `matrix`
};

Signal make_signal(const SignalSpec& spec, const RngStream& rng);

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine);

/// A^m = h^{-1}(g^{-1}(g(h(A)) + E^m)) with E^m i.i.d. N(0, sigma^2) on the
/// mock-lower-triangular support and zero elsewhere.
std::vector<RPsdMatrix> intrinsic_sample(const RPsdMatrix& A, double sigma, int M, const RngStream& rng);

/// The log-Cholesky noise matrices intrinsic_sample would add, in order.
std::vector<Matrix> intrinsic_noise(const RPsdMatrix& A, double sigma, int M, const RngStream& rng);

/// A^m = (N + E^m)(N + E^m)^T. Throws NotInManifoldError listing samples
/// whose index-set block (N + E^m)[I,:] is singular.
std::vector<RPsdMatrix> spn_build(const CholFactor& N, const std::vector<Matrix>& Es);

/// n x p matrix of i.i.d. N(0, Sigma) rows, X = Z L^T with Sigma = L L^T.
Matrix gaussian_data(const Matrix& Sigma, int n, const RngStream& rng);
Matrix gaussian_data(const Matrix& Sigma, int n, std::mt19937_64& engine);

/// Uncentered sample covariance (1/n) X^T X.
Matrix sample_cov(const Matrix& X);

/// Sample covariance of n i.i.d. N(0, Sigma) points drawn directly from the
/// Wishart law via the Bartlett decomposition (needs n >= p; falls back to
/// explicit data otherwise).
Matrix wishart_cov(const Matrix& Sigma, int n, std::mt19937_64& engine);

/// Intrinsic draw, then per sample: n_inner points from N(0, A^m + 0.01 I),
/// sample covariance, best rank-K approximation.
std::vector<RPsdMatrix> extrinsic_sample(const RPsdMatrix& A, double sigma_sq, int M, const RngStream& rng,
                                         int n_inner = 2000);

}  // namespace psdk::models
