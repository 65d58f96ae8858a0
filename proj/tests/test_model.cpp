#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace stls;
using stls::testing::randn;

TEST(StructuredMatrix, ZeroCoefficientsGiveOffset) {
  std::mt19937_64 rng(1);
  auto s = stls::testing::random_structure(rng, 4, 3, 5, 2).with_offset(randn(rng, 4, 4));
  const MatrixXd out = structured_matrix(s, VectorXd::Zero(s.n_p()));
  EXPECT_EQ(out, s.S0());
}

TEST(StructuredMatrix, CanonicalAtomsRebuildData) {
  std::mt19937_64 rng(2);
  const MatrixXd A = randn(rng, 3, 4);
  const VectorXd y = randn(rng, 3);
  const auto s = canonical_structure<double>(3, 4);
  VectorXd p(s.n_p());
  p << Eigen::Map<const VectorXd>(A.data(), A.size()), y;
  MatrixXd expected(3, 5);
  expected << A, y;
  EXPECT_EQ(structured_matrix(s, p), expected);
}

TEST(StructuredMatrix, ScalarExample) {
  std::vector<SparseXd> atoms{MatrixXd::Constant(1, 1, 2.0).sparseView()};
  AffineStructure<double> s(1, 1, atoms, MatrixXd::Constant(1, 1, 3.0));
  const MatrixXd out = structured_matrix(s, Eigen::Vector2d(1, -1));
  EXPECT_DOUBLE_EQ(out(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out(0, 1), -3.0);
}

TEST(StructuredMatrix, RejectsWrongLength) {
  const auto s = canonical_structure<double>(2, 2);
  EXPECT_THROW(structured_matrix(s, VectorXd::Zero(3)), StructuralError);
}

TEST(StructuredMatrix, IsAffine) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto s0 = stls::testing::random_structure(rng, 5, 4, 6, 3);
    const auto s = s0.with_offset(randn(rng, 5, 5));
    const VectorXd p = randn(rng, s.n_p()), q = randn(rng, s.n_p());
    const MatrixXd lhs = structured_matrix(s, VectorXd(p + q)) - structured_matrix(s, q);
    EXPECT_LT((lhs - structured_matrix(s0, p)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GAndR, ZeroX) {
  std::mt19937_64 rng(4);
  const auto s = stls::testing::random_structure(rng, 4, 3, 5, 2);
  ProblemInstance<double> prob(randn(rng, 4), randn(rng, 4, 3));
  const auto gr = g_and_r(s, prob, VectorXd::Zero(3));
  EXPECT_EQ(gr.G.leftCols(5), MatrixXd::Zero(4, 5));
  EXPECT_EQ(gr.G.rightCols(2), s.vector_atoms());
  EXPECT_EQ(gr.r, prob.y());
}

TEST(GAndR, ExactFitHasZeroResidual) {
  std::mt19937_64 rng(5);
  const MatrixXd A = randn(rng, 5, 3);
  const VectorXd x = randn(rng, 3);
  ProblemInstance<double> prob(A * x, A);
  const auto gr = g_and_r(canonical_structure<double>(5, 3), prob, x);
  EXPECT_LT(gr.r.norm(), 1e-14);
}

TEST(GAndR, CanonicalGramIsScaledIdentity) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index m = 2 + t % 5, n = 1 + t % 7;
    ProblemInstance<double> prob(randn(rng, m), randn(rng, m, n));
    const VectorXd x = randn(rng, n);
    const auto gr = g_and_r(canonical_structure<double>(m, n), prob, x);
    const MatrixXd diff = gr.G * gr.G.transpose() - (1 + x.squaredNorm()) * MatrixXd::Identity(m, m);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GAndR, ConstraintMatrixFlipsVectorBlock) {
  std::mt19937_64 rng(7);
  const auto s = stls::testing::random_structure(rng, 4, 3, 2, 2);
  ProblemInstance<double> prob(randn(rng, 4), randn(rng, 4, 3));
  const VectorXd x = randn(rng, 3);
  const auto gr = g_and_r(s, prob, x);
  const MatrixXd Gt = constraint_matrix(s, x);
  EXPECT_EQ(Gt.leftCols(2), gr.G.leftCols(2));
  EXPECT_EQ(Gt.rightCols(2), -gr.G.rightCols(2));
}

TEST(WeightMatrix, Validation) {
  EXPECT_THROW(WeightMatrix<double>(MatrixXd::Identity(2, 3), 1), StructuralError);
  MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(WeightMatrix<double>(asym, 1), StructuralError);
  EXPECT_THROW(WeightMatrix<double>(Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix(), 1), StructuralError);
  EXPECT_THROW(WeightMatrix<double>(MatrixXd::Identity(2, 2), 3), StructuralError);
  const auto W = WeightMatrix<double>::block_diagonal(2.0, 3, 5.0, 2);
  EXPECT_TRUE(W.is_diagonal());
  EXPECT_EQ(W.n_a(), 3);
  EXPECT_EQ(W.n_y(), 2);
  EXPECT_DOUBLE_EQ(W.W_yy()(1, 1), 5.0);
}

TEST(GroupMap, RejectsOverlapAndGaps) {
  EXPECT_THROW(GroupMap({{0, 1}, {1, 2}}, 3), StructuralError);
  EXPECT_THROW(GroupMap({{0, 1}}, 3), StructuralError);
  EXPECT_NO_THROW(GroupMap({{0, 2}, {1}}, 3));
}

TEST(ComplexLift, RealInputIsBlockDiagonal) {
  std::mt19937_64 rng(8);
  const MatrixXd A = randn(rng, 3, 2);
  const VectorXd y = randn(rng, 3);
  const auto L = complex_to_real_lift<double>(y.cast<std::complex<double>>(), A.cast<std::complex<double>>(), {},
                                              CMat<double>::Identity(3, 3));
  EXPECT_EQ(L.problem.A().topLeftCorner(3, 2), A);
  EXPECT_EQ(L.problem.A().bottomRightCorner(3, 2), A);
  EXPECT_EQ(L.problem.A().topRightCorner(3, 2), MatrixXd::Zero(3, 2));
  EXPECT_EQ(L.problem.A().bottomLeftCorner(3, 2), MatrixXd::Zero(3, 2));
  EXPECT_EQ(L.problem.y().head(3), y);
  EXPECT_EQ(L.problem.y().tail(3), VectorXd::Zero(3));
}

TEST(ComplexLift, ScalarExample) {
  using C = std::complex<double>;
  CVec<double> y(1);
  y << C(1, 1);
  CMat<double> A(1, 1);
  A << C(0, 1);
  const auto L = complex_to_real_lift<double>(y, A, {}, CMat<double>::Identity(1, 1));
  Eigen::Matrix2d expected;
  expected << 0, -1, 1, 0;
  EXPECT_EQ(L.problem.A(), MatrixXd(expected));
  const VectorXd x = L.problem.A().colPivHouseholderQr().solve(L.problem.y());
  EXPECT_NEAR(x(0), 1.0, 1e-14);
  EXPECT_NEAR(x(1), -1.0, 1e-14);
  const C xc = unlift_vector<double>(x)(0);
  EXPECT_LT(std::abs(C(0, 1) * xc - C(1, 1)), 1e-14);
}

TEST(ComplexLift, GroupNormIsModulus) {
  std::mt19937_64 rng(9);
  CVec<double> x(4);
  for (int i = 0; i < 4; ++i) x(i) = {randn(rng, 1)(0), randn(rng, 1)(0)};
  const VectorXd xl = lift_vector<double>(x);
  const auto L = complex_to_real_lift<double>(CVec<double>::Zero(2), CMat<double>::Zero(2, 4), {},
                                              CMat<double>::Identity(2, 2));
  for (const auto& g : L.groups.groups()) {
    ASSERT_EQ(g.size(), 2u);
    EXPECT_NEAR(std::hypot(xl(g[0]), xl(g[1])), std::abs(x(g[0])), 1e-15);
  }
  EXPECT_NEAR(penalty(xl, RegularizationSpec(1.0, L.groups)), x.cwiseAbs().sum(), 1e-12);
}

TEST(ComplexLift, RoundTrip) {
  std::mt19937_64 rng(10);
  CMat<double> M(3, 4);
  M.real() = randn(rng, 3, 4);
  M.imag() = randn(rng, 3, 4);
  EXPECT_EQ(unlift_matrix<double>(lift_matrix<double>(M)), M);
  CVec<double> v(4);
  v.real() = randn(rng, 4);
  v.imag() = randn(rng, 4);
  EXPECT_EQ(unlift_vector<double>(lift_vector<double>(v)), v);
  // lifted product equals lifted complex product
  const VectorXd lhs = lift_matrix<double>(M) * lift_vector<double>(v);
  EXPECT_LT((lhs - lift_vector<double>(CVec<double>(M * v))).norm(), 1e-13);
}

TEST(ComplexLift, AtomsLiftWithRealCoefficients) {
  std::mt19937_64 rng(11);
  CMat<double> A(2, 3), S(2, 3);
  A.real() = randn(rng, 2, 3);
  A.imag() = randn(rng, 2, 3);
  S.real() = randn(rng, 2, 3);
  S.imag() = randn(rng, 2, 3);
  const auto L = complex_to_real_lift<double>(CVec<double>::Zero(2), A, {S}, CMat<double>::Identity(2, 2));
  const double e = 0.37;
  const MatrixXd lifted = L.problem.A() + L.structure.combine_matrix_atoms(Eigen::Matrix<double, 1, 1>(e));
  EXPECT_LT((lifted - lift_matrix<double>(CMat<double>(A + e * S))).cwiseAbs().maxCoeff(), 1e-14);
}
