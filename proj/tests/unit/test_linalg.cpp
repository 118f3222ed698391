#include "psdk/errors.hpp"
#include "psdk/linalg.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace psdk;
using psdk::linalg::GivensOrder;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) M(i, j++) = v;
    ++i;
  }
  return M;
}

void expect_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  EXPECT_LE(max_norm(a - b), tol) << "got\n" << a << "\nexpected\n" << b;
}

}  // namespace

TEST(IndexSetTest, RejectsDuplicatesAndOutOfRange) {
  EXPECT_THROW(IndexSet({0, 0}, 3), NumericalError);
  EXPECT_THROW(IndexSet({0, 3}, 3), NumericalError);
  EXPECT_THROW(IndexSet({-1}, 3), NumericalError);
  const IndexSet I({2, 0}, 4);
  EXPECT_EQ(I.complement(4), (std::vector<int>{1, 3}));
  EXPECT_EQ(IndexSet::canonical(2, 4).indices(), (std::vector<int>{0, 1}));
}

TEST(ReducedCholesky, IdentityFactorsToIdentity) {
  const CholFactor N = linalg::reduced_cholesky(Matrix::Identity(2, 2), 2, IndexSet::canonical(2, 2));
  expect_near(N.entries, Matrix::Identity(2, 2), 0.0);
}

TEST(ReducedCholesky, RankOneCanonical) {
  const CholFactor N = linalg::reduced_cholesky(mat({{4, 2}, {2, 1}}), 1, IndexSet({0}, 2));
  expect_near(N.entries, mat({{2}, {1}}), 1e-15);
}

TEST(ReducedCholesky, RankOneOnSecondRow) {
  const CholFactor N = linalg::reduced_cholesky(mat({{1, 2}, {2, 4}}), 1, IndexSet({1}, 2));
  expect_near(N.entries, mat({{1}, {2}}), 1e-15);
}

TEST(ReducedCholesky, MatchesFrozenFactorForPermutedIndexSet) {
  const Matrix N0 = mat({{0.7, 1.3}, {0.4, -0.9}, {1.5, 0.0}, {-0.2, 0.6}});
  const CholFactor N = linalg::reduced_cholesky(N0 * N0.transpose(), 2, IndexSet({2, 0}, 4));
  expect_near(N.entries, N0, 1e-14);
  EXPECT_EQ(N.entries(2, 1), 0.0);
}

TEST(ReducedCholesky, SingularBlockIsNotInManifold) {
  const Matrix A = Eigen::Vector3d(0, 1, 1).asDiagonal();
  try {
    linalg::reduced_cholesky(A, 2, IndexSet::canonical(2, 3));
    FAIL() << "expected NotInManifold";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotInManifold);
  }
}

TEST(ReducedCholesky, AsymmetricInputRejected) {
  try {
    linalg::reduced_cholesky(mat({{1, 2}, {0, 4}}), 1, IndexSet({0}, 2));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSymmetric);
  }
}

TEST(LqGivens, LowerTriangularInputIsAlreadyFactored) {
  const Matrix M = mat({{2, 0, 0}, {1, 3, 0}, {-1, 0.5, 1}});
  const auto f = linalg::lq_givens(M);
  expect_near(f.R, M, 1e-15);
  expect_near(f.Q, Matrix::Identity(3, 3), 1e-15);
}

TEST(LqGivens, SwapMatrix) {
  const Matrix M = mat({{0, 1}, {1, 0}});
  for (auto order : {GivensOrder::RowMajor, GivensOrder::ColumnMajor}) {
    const auto f = linalg::lq_givens(M, order);
    expect_near(f.R, Matrix::Identity(2, 2), 1e-15);
    expect_near(f.Q, M, 1e-15);
  }
}

TEST(LqGivens, RotationHasIdentityTriangle) {
  const double t = 0.7;
  const Matrix M = mat({{std::cos(t), std::sin(t)}, {-std::sin(t), std::cos(t)}});
  const auto f = linalg::lq_givens(M);
  expect_near(f.R, Matrix::Identity(2, 2), 1e-15);
  expect_near(f.Q, M, 1e-15);
}

TEST(LqGivens, MatchesFrozenFactors) {
  const Matrix M = mat({{2, -1, 0.5}, {1, 3, -2}, {0, 1, 1.5}});
  const Matrix R = mat({{2.29128784747792, 0, 0},
                        {-0.8728715609439698, 3.638419332360584, 0},
                        {-0.1091089451179962, -0.02617567865007597, 1.7992804317122015}});
  const Matrix Q = mat({{0.8728715609439694, -0.4364357804719848, 0.2182178902359924},
                        {0.48425005502640867, 0.7198311628770941, -0.4973378943514467},
                        {0.0599760143904067, 0.5397841295136604, 0.8396642014656941}});
  const auto f = linalg::lq_givens(M);
  expect_near(f.R, R, 1e-14);
  expect_near(f.Q, Q, 1e-14);
}

TEST(LqGivens, SingularInputRejected) {
  try {
    linalg::lq_givens(mat({{1, 2}, {2, 4}}));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Singular);
  }
}

TEST(SymEig, DiagonalInput) {
  Matrix S = Matrix::Zero(3, 3);
  S.diagonal() << 3, 2, 1;
  const SpectralPair top = linalg::sym_eig_topk(S, 2);
  expect_near(top.V, Matrix::Identity(3, 3).leftCols(2), 1e-15);
  EXPECT_NEAR(top.lambda(0), 3.0, 1e-15);
  EXPECT_NEAR(top.lambda(1), 2.0, 1e-15);
}

TEST(SymEig, RankOneSignConvention) {
  Vector v(2);
  v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const SpectralPair top = linalg::sym_eig_topk(v * v.transpose(), 1);
  EXPECT_NEAR(top.lambda(0), 1.0, 1e-15);
  expect_near(top.V, v, 1e-15);
}

TEST(SymEig, RandomResidual) {
  std::mt19937_64 rng(11);
  const Matrix G = gen::gaussian(5, 5, rng);
  const Matrix S = 0.5 * (G + G.transpose());
  const SpectralPair top = linalg::sym_eig_topk(S, 3);
  EXPECT_LT((S * top.V - top.V * top.lambda.asDiagonal()).norm(), 1e-10);
  EXPECT_GE(top.lambda(0), top.lambda(1));
  EXPECT_GE(top.lambda(1), top.lambda(2));
}

TEST(SymEig, RequirePositiveRejectsZeroEigenvalue) {
  Matrix S = Matrix::Zero(3, 3);
  S(0, 0) = 1.0;
  try {
    linalg::sym_eig_topk(S, 2, true);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveSpectrum);
  }
}

TEST(ProcrustesSign, OrthogonalInputIsFixed) {
  std::mt19937_64 rng(3);
  const Matrix H = gen::random_orthogonal(4, rng);
  expect_near(linalg::procrustes_sign(H), H, 1e-12);
}

TEST(ProcrustesSign, DiagonalInput) {
  expect_near(linalg::procrustes_sign(mat({{0.5, 0}, {0, -0.2}})), mat({{1, 0}, {0, -1}}), 1e-15);
}

TEST(ProcrustesSign, AntiDiagonalInput) {
  expect_near(linalg::procrustes_sign(mat({{0, 2}, {3, 0}})), mat({{0, 1}, {1, 0}}), 1e-15);
}

TEST(ProcrustesSign, MatchesFrozenPolarFactor) {
  const Matrix H = mat({{0.9, 0.2, -0.1}, {0.1, -0.8, 0.3}, {0.05, 0.2, 0.7}});
  const Matrix P = mat({{0.9827304674684924, 0.15568141179045414, -0.10002062953256063},
                        {0.17919308600147826, -0.9354951897620946, 0.30453010994193885},
                        {0.04615914035622365, 0.3171940225712231, 0.9472366577612279}});
  expect_near(linalg::procrustes_sign(H), P, 1e-14);
}

TEST(ProcrustesSign, SingularInputRejected) {
  EXPECT_THROW(linalg::procrustes_sign(mat({{1, 0}, {0, 0}})), NumericalError);
}

TEST(ProjectorDistance, Examples) {
  std::mt19937_64 rng(5);
  const Matrix V = gen::random_orthonormal(6, 2, rng);
  EXPECT_NEAR(linalg::projector_distance(V, V), 0.0, 1e-15);
  EXPECT_NEAR(linalg::projector_distance(Matrix::Identity(2, 2).col(0), Matrix::Identity(2, 2).col(1)),
              std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(linalg::projector_distance(V, V * gen::random_orthogonal(2, rng)), 0.0, 1e-14);
}

TEST(RankKApprox, KeepsTopEigenpairs) {
  Matrix S = Matrix::Zero(3, 3);
  S.diagonal() << 1, 5, 3;
  Matrix expected = Matrix::Zero(3, 3);
  expected(1, 1) = 5;
  expected(2, 2) = 3;
  expect_near(linalg::rank_k_approx(S, 2), expected, 1e-14);
}
