#include "psdk/dpca.hpp"
#include "psdk/errors.hpp"
#include "psdk/linalg.hpp"
#include "psdk/models.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace psdk;

namespace {

std::vector<Matrix> local_covariances(const Matrix& Sigma, int M, int n, std::uint64_t seed) {
  std::vector<Matrix> covs;
  for (int m = 0; m < M; ++m) {
    covs.push_back(models::sample_cov(models::gaussian_data(Sigma, n, models::RngStream{seed, static_cast<std::uint64_t>(m)})));
  }
  return covs;
}

std::vector<dpca::LocalSummary> summaries_of(const std::vector<Matrix>& covs, int K) {
  std::vector<dpca::LocalSummary> out;
  for (std::size_t m = 0; m < covs.size(); ++m) out.push_back(dpca::summarize(covs[m], K, static_cast<int>(m)));
  return out;
}

}  // namespace

TEST(FullPca, SingleMachineAndExactCovariance) {
  const models::Signal sig = models::make_signal({15, 3, 0.0, models::Construction::Spiked}, {1, 1});
  const auto covs = local_covariances(sig.matrix, 1, 100, 3);
  const SpectralPair local = linalg::sym_eig_topk(covs[0], 3);
  EXPECT_LT(linalg::projector_distance(dpca::full_pca(covs, 3).V_est, local.V), 1e-10);
  const std::vector<Matrix> exact(4, sig.matrix);
  EXPECT_LT(linalg::projector_distance(dpca::full_pca(exact, 3).V_est, sig.top.V), 1e-10);
}

TEST(AllMethods, SingleMachineRecoversLocalSpan) {
  const models::Signal sig = models::make_signal({15, 3, 0.0, models::Construction::Spiked}, {1, 2});
  const auto covs = local_covariances(sig.matrix, 1, 100, 4);
  const auto summaries = summaries_of(covs, 3);
  const Matrix& V1 = summaries[0].V;
  EXPECT_LT(linalg::projector_distance(dpca::lrc_dpca(summaries, 3, IndexSet::canonical(3, 15)).V_est, V1), 1e-10);
  EXPECT_LT(linalg::projector_distance(dpca::dpca_fan(summaries, 3).V_est, V1), 1e-10);
  EXPECT_LT(linalg::projector_distance(dpca::dpca_bw(summaries, 3).V_est, V1), 1e-10);
}

TEST(AllMethods, IdenticalMachinesAgreeWithFullPca) {
  const models::Signal sig = models::make_signal({15, 3, 0.0, models::Construction::Spiked}, {1, 3});
  const auto one = local_covariances(sig.matrix, 1, 200, 5);
  const std::vector<Matrix> covs(5, one[0]);
  const auto summaries = summaries_of(covs, 3);
  const Matrix V = dpca::full_pca(covs, 3).V_est;
  const IndexSet I = dpca::find_index(summaries[0].V, summaries[0].lambda, 3);
  const dpca::DpcaResult lrc = dpca::lrc_dpca(summaries, 3, I);
  EXPECT_LT(linalg::projector_distance(lrc.V_est, V), 1e-10);
  ASSERT_TRUE(lrc.index_set_used.has_value());
  EXPECT_EQ(*lrc.index_set_used, I);
  EXPECT_LT(linalg::projector_distance(dpca::dpca_fan(summaries, 3).V_est, V), 1e-10);
  EXPECT_LT(linalg::projector_distance(dpca::dpca_bw(summaries, 3).V_est, V), 1e-10);
}

TEST(LrcDpca, ReportsOffendingMachines) {
  // machine 1's eigenvectors vanish on the chosen rows
  const int p = 6, K = 2;
  Matrix good = Matrix::Zero(p, K);
  good(0, 0) = 1.0;
  good(1, 1) = 1.0;
  Matrix bad = Matrix::Zero(p, K);
  bad(4, 0) = 1.0;
  bad(5, 1) = 1.0;
  const Eigen::Vector2d lambda(2, 1);
  const std::vector<dpca::LocalSummary> summaries{{good, lambda, 10}, {bad, lambda, 11}, {good, lambda, 12}};
  try {
    dpca::lrc_dpca(summaries, K, IndexSet::canonical(K, p));
    FAIL();
  } catch (const NotInManifoldError& e) {
    EXPECT_EQ(e.offending(), (std::vector<int>{11}));
  }
}

TEST(LrcDpca, SquaresEigenvalues) {
  // two machines on the same axis with eigenvalues 1 and 4: Karcher mean of 1 and 16 is 4
  Matrix V = Matrix::Zero(2, 1);
  V(0, 0) = 1.0;
  const std::vector<dpca::LocalSummary> summaries{{V, Vector::Constant(1, 1.0), 0}, {V, Vector::Constant(1, 4.0), 1}};
  const dpca::DpcaResult r = dpca::lrc_dpca(summaries, 1, IndexSet({0}, 2));
  EXPECT_LT(linalg::projector_distance(r.V_est, V), 1e-15);
  EXPECT_NEAR(r.gap_estimate, 4.0, 1e-12);
}

TEST(EuclidRankKMean, Examples) {
  const IndexSet I({0}, 2);
  Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2), expected = Matrix::Zero(2, 2);
  a(0, 0) = 1;
  b(0, 0) = 4;
  expected(0, 0) = 2.5;
  const std::vector<RPsdMatrix> As{{a, 1, I}, {b, 1, I}};
  EXPECT_LE(max_norm(dpca::euclid_rankk_mean(As, 1).A - expected), 1e-15);
  std::mt19937_64 rng(1);
  const RPsdMatrix A = gen::random_rpsd(6, 2, IndexSet::canonical(2, 6), rng);
  const std::vector<RPsdMatrix> same{A, A, A};
  EXPECT_LE(max_norm(dpca::euclid_rankk_mean(same, 2).A - A.A), 1e-12);
}

TEST(FindIndex, PaddedIdentity) {
  Matrix V = Matrix::Zero(5, 3);
  V.topRows(3) = Matrix::Identity(3, 3);
  EXPECT_EQ(dpca::find_index(V, Vector::Ones(3), 3).indices(), (std::vector<int>{0, 1, 2}));
}

TEST(FindIndex, SmallExamples) {
  Matrix T(2, 1);
  T << 0, 1;
  EXPECT_EQ(dpca::find_index(T, Vector::Ones(1), 1).indices(), (std::vector<int>{1}));
  Matrix T3(3, 2);
  T3 << 0, 0, 1, 0, 0, 1;
  EXPECT_EQ(dpca::find_index(T3, Vector::Ones(2), 2).indices(), (std::vector<int>{1, 2}));
}

TEST(FindIndex, TiesGoToSmallestRow) {
  Matrix V = Matrix::Zero(4, 1);
  V(1, 0) = 0.5;
  V(3, 0) = -0.5;
  EXPECT_EQ(dpca::find_index(V, Vector::Ones(1), 1).indices(), (std::vector<int>{1}));
}

TEST(FindIndex, Errors) {
  try {
    dpca::find_index(Matrix::Zero(4, 2), Vector::Ones(2), 2);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateRows);
  }
  try {
    dpca::find_index(Matrix::Identity(4, 2), Eigen::Vector2d(1, 0), 2);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveSpectrum);
  }
}

TEST(Summarize, RejectsRankDeficientCovariance) {
  Matrix S = Matrix::Zero(4, 4);
  S(0, 0) = 1.0;
  EXPECT_THROW(dpca::summarize(S, 2, 0), NumericalError);
}
