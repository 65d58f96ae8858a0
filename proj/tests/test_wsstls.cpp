#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace stls;
using stls::testing::randn;
using stls::testing::uniform;
using stls::testing::uniform_int;

namespace {

ProblemInstance<double> random_problem(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n) {
  return ProblemInstance<double>(randn(rng, m), randn(rng, m, n, 1.0 / std::sqrt(double(m))));
}

/// min eps' W eps  s.t.  [S^A(I kron x), -S^y] eps = r, via the KKT system.
double kkt_min_energy(const AffineStructure<double>& s, const ProblemInstance<double>& prob,
                      const WeightMatrix<double>& W, const VectorXd& x) {
  const MatrixXd G = constraint_matrix(s, x);
  const VectorXd r = prob.y() - prob.A() * x;
  const Eigen::Index p = G.cols(), m = G.rows();
  MatrixXd K = MatrixXd::Zero(p + m, p + m);
  K.topLeftCorner(p, p) = 2.0 * W.W();
  K.topRightCorner(p, m) = G.transpose();
  K.bottomLeftCorner(m, p) = G;
  VectorXd rhs = VectorXd::Zero(p + m);
  rhs.tail(m) = r;
  const VectorXd sol = K.fullPivLu().solve(rhs);
  const VectorXd eps = sol.head(p);
  return eps.dot(W.W() * eps);
}

/// Conjugate-gradient minimization of the epsA objective with epsY eliminated.
VectorXd eps_a_oracle(const AffineStructure<double>& s, const ProblemInstance<double>& prob,
                      const WeightMatrix<double>& W, const VectorXd& x) {
  const MatrixXd SyP = s.vector_atoms().completeOrthogonalDecomposition().pseudoInverse();
  const MatrixXd B = atoms_times_x(s, x);
  const VectorXd r = prob.y() - prob.A() * x;
  auto stack = [&](const VectorXd& ea) {
    VectorXd e(s.n_p());
    e << ea, SyP * (B * ea - r);
    return e;
  };
  auto grad = [&](const VectorXd& ea) {
    const VectorXd wE = W.W() * stack(ea);
    return VectorXd(2.0 * (wE.head(s.n_a()) + (SyP * B).transpose() * wE.tail(s.n_y())));
  };
  VectorXd ea = VectorXd::Zero(s.n_a());
  VectorXd g = grad(ea), d = -g;
  const VectorXd g0 = grad(VectorXd::Zero(s.n_a()));
  for (int it = 0; it < 10 * s.n_a() && g.norm() > 1e-14 * (1 + g0.norm()); ++it) {
    // exact line search on a quadratic: Hd from a gradient difference
    const VectorXd Hd = grad(VectorXd(ea + d)) - g;
    const double step = -g.dot(d) / d.dot(Hd);
    ea += step * d;
    const VectorXd gn = grad(ea);
    d = -gn + (gn.squaredNorm() / g.squaredNorm()) * d;
    g = gn;
  }
  return ea;
}

}  // namespace

TEST(WsstlsReducedCost, CanonicalIdentityEqualsFractional) {
  std::mt19937_64 rng(70);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index m = uniform_int(rng, 2, 6), n = uniform_int(rng, 1, 6);
    const auto prob = random_problem(rng, m, n);
    const auto s = canonical_structure<double>(m, n);
    const auto W = WeightMatrix<double>::identity(m * n, m);
    const VectorXd x = randn(rng, n, 2.0);
    const RegularizationSpec reg(uniform(rng, 0, 1));
    const double a = wsstls_cost_reduced(prob, s, W, x, reg), b = cost_fractional(prob, x, reg);
    EXPECT_LT(std::abs(a - b), 1e-10 * (1 + b));
  }
}

TEST(WsstlsReducedCost, ExactFitLeavesPenalty) {
  std::mt19937_64 rng(71);
  const auto s = stls::testing::random_structure(rng, 4, 3, 5, 4);
  const MatrixXd A = randn(rng, 4, 3);
  const VectorXd x = randn(rng, 3);
  ProblemInstance<double> prob(A * x, A);
  const auto W = stls::testing::random_weight(rng, 5, 4);
  EXPECT_NEAR(wsstls_cost_reduced(prob, s, W, x, RegularizationSpec(0.7)), 0.7 * x.lpNorm<1>(), 1e-12);
}

TEST(WsstlsReducedCost, MatchesKktOracle) {
  std::mt19937_64 rng(72);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index m = uniform_int(rng, 2, 5), n = uniform_int(rng, 1, 4);
    const Eigen::Index n_a = uniform_int(rng, 1, 6);
    const auto s = stls::testing::random_structure(rng, m, n, n_a, m);
    const auto W = stls::testing::random_weight(rng, n_a, m);
    const auto prob = random_problem(rng, m, n);
    const VectorXd x = randn(rng, n);
    const double reduced = wsstls_cost_reduced(prob, s, W, x, RegularizationSpec(0.0));
    const double kkt = kkt_min_energy(s, prob, W, x);
    EXPECT_LT(std::abs(reduced - kkt), 1e-9 * (1 + kkt)) << "case " << t;
    // the alternating epsA step attains the same minimum when S^y is square
    const WsstlsContext<double> ctx(prob, s, W);
    const double attained = wsstls_cost(ctx, x, eps_a_update(ctx, x), RegularizationSpec(0.0));
    EXPECT_LT(std::abs(attained - kkt), 1e-9 * (1 + kkt));
  }
}

TEST(EpsY, Examples) {
  std::mt19937_64 rng(73);
  const auto s = stls::testing::random_structure(rng, 5, 3, 4, 2);
  const MatrixXd A = randn(rng, 5, 3);
  const VectorXd x = randn(rng, 3);
  EXPECT_LT(eps_y_eliminate(s, ProblemInstance<double>(A * x, A), x, VectorXd(VectorXd::Zero(4))).norm(), 1e-14);
  const auto c = canonical_structure<double>(5, 3);
  const auto prob = random_problem(rng, 5, 3);
  const VectorXd ey = eps_y_eliminate(c, prob, x, VectorXd(VectorXd::Zero(15)));
  EXPECT_LT((ey - (prob.A() * x - prob.y())).norm(), 1e-14);
}

TEST(EpsY, RejectsRankDeficientSy) {
  std::mt19937_64 rng(74);
  MatrixXd Sy = randn(rng, 4, 2);
  Sy.col(1) = Sy.col(0);
  AffineStructure<double> s(4, 3, {}, Sy);
  const auto prob = random_problem(rng, 4, 3);
  EXPECT_THROW(eps_y_eliminate(s, prob, VectorXd(VectorXd::Zero(3)), VectorXd(VectorXd::Zero(0))), StructuralError);
}

TEST(EpsY, ConstraintHolds) {
  std::mt19937_64 rng(75);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index m = uniform_int(rng, 2, 6), n = uniform_int(rng, 1, 5), n_a = uniform_int(rng, 1, 6);
    const auto s = stls::testing::random_structure(rng, m, n, n_a, m);
    const auto prob = random_problem(rng, m, n);
    const VectorXd x = randn(rng, n), ea = randn(rng, n_a);
    const VectorXd ey = eps_y_eliminate(s, prob, x, ea);
    const VectorXd lhs = atoms_times_x(s, x) * ea - s.vector_atoms() * ey;
    EXPECT_LT((lhs - (prob.y() - prob.A() * x)).cwiseAbs().maxCoeff(), 1e-12);
    // S(p + eps)[x; -1] = 0 with p the coefficients of [A y] in the canonical S0 offset
    MatrixXd S0(m, n + 1);
    S0 << prob.A(), prob.y();
    VectorXd e(s.n_p());
    e << ea, ey;
    VectorXd xe(n + 1);
    xe << x, -1;
    EXPECT_LT((structured_matrix(s.with_offset(S0), e) * xe).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(EpsA, TrivialCases) {
  std::mt19937_64 rng(76);
  const auto s = stls::testing::random_structure(rng, 5, 3, 4, 3);
  const auto prob = random_problem(rng, 5, 3);
  const auto I = WeightMatrix<double>::identity(4, 3);
  EXPECT_LT(eps_a_update(s, prob, I, VectorXd(VectorXd::Zero(3))).norm(), 1e-15);
  const VectorXd x = randn(rng, 3);
  const auto W = stls::testing::random_weight(rng, 4, 3);
  EXPECT_LT(eps_a_update(s, ProblemInstance<double>(prob.A() * x, prob.A()), W, x).norm(), 1e-13);
}

TEST(EpsA, MatchesNumericMinimization) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n_a = uniform_int(rng, 1, 6), n_y = uniform_int(rng, 1, 6);
    const Eigen::Index m = n_y + uniform_int(rng, 0, 2), n = uniform_int(rng, 1, 4);
    const auto s = stls::testing::random_structure(rng, m, n, n_a, n_y);
    const auto W = stls::testing::random_weight(rng, n_a, n_y);
    const auto prob = random_problem(rng, m, n);
    const VectorXd x = randn(rng, n);
    const VectorXd ea = eps_a_update(s, prob, W, x);
    const VectorXd oracle = eps_a_oracle(s, prob, W, x);
    EXPECT_LT((ea - oracle).cwiseAbs().maxCoeff(), 1e-8 * (1 + oracle.cwiseAbs().maxCoeff())) << "case " << t;
  }
}

TEST(WsstlsXUpdate, HugeLambdaGivesZero) {
  std::mt19937_64 rng(78);
  const auto s = stls::testing::random_structure(rng, 5, 4, 3, 5);
  const auto W = stls::testing::random_weight(rng, 3, 5);
  const auto prob = random_problem(rng, 5, 4);
  const WsstlsContext<double> ctx(prob, s, W);
  const auto res = wsstls_x_update<double>(ctx, randn(rng, 3), RegularizationSpec(1e8), randn(rng, 4));
  EXPECT_EQ(res.x, VectorXd::Zero(4));
}

TEST(WsstlsXUpdate, ReducesToLassoCd) {
  std::mt19937_64 rng(79);
  const auto prob = random_problem(rng, 6, 9);
  const auto s = canonical_structure<double>(6, 9);
  const auto W = WeightMatrix<double>::identity(54, 6);
  const WsstlsContext<double> ctx(prob, s, W);
  const VectorXd x0 = randn(rng, 9);
  CdConfig one;
  one.max_sweeps = 1;
  VectorXd a = x0, b = x0;
  for (int sweep = 0; sweep < 20; ++sweep) {
    a = wsstls_x_update<double>(ctx, VectorXd::Zero(54), RegularizationSpec(0.2), a, one).x;
    b = lasso_cd<double>(prob.y(), prob.A(), 0.2, b, one).x;
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(WsstlsXUpdate, ScalarStepMatchesGridOracle) {
  std::mt19937_64 rng(80);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index m = uniform_int(rng, 2, 5), n = uniform_int(rng, 1, 4), n_a = uniform_int(rng, 1, 4);
    const auto s = stls::testing::random_structure(rng, m, n, n_a, m);
    const auto W = stls::testing::random_weight(rng, n_a, m);
    const auto prob = random_problem(rng, m, n);
    const WsstlsContext<double> ctx(prob, s, W);
    const VectorXd ea = randn(rng, n_a, 0.3);
    const RegularizationSpec reg(uniform(rng, 0.0, 2.0));
    CdConfig one;
    one.max_sweeps = 1;
    const VectorXd x = wsstls_x_update<double>(ctx, ea, reg, randn(rng, n), one).x;
    // last coordinate of the sweep is an exact minimizer with the others fixed
    auto f = [&](double v) {
      VectorXd z = x;
      z(n - 1) = v;
      return wsstls_cost(ctx, z, ea, reg);
    };
    const double lo = x(n - 1) - 1.0, hi = x(n - 1) + 1.0;
    const double xg = stls::testing::grid_argmin(f, lo, hi, 4000);
    EXPECT_LE(std::abs(xg - x(n - 1)), (hi - lo) / 4000 + 1e-12) << "case " << t;
  }
}

TEST(SolveWsstls, ZeroData) {
  std::mt19937_64 rng(81);
  const auto s = stls::testing::random_structure(rng, 5, 4, 3, 5);
  const auto W = stls::testing::random_weight(rng, 3, 5);
  ProblemInstance<double> prob(VectorXd::Zero(5), randn(rng, 5, 4));
  const auto rep = solve_wsstls(prob, s, W, RegularizationSpec(0.1));
  EXPECT_EQ(rep.x_hat, VectorXd::Zero(4));
  EXPECT_EQ(rep.eps().eps_a, VectorXd::Zero(3));
  EXPECT_EQ(rep.eps().eps_y, VectorXd::Zero(5));
}

TEST(SolveWsstls, CanonicalMatchesAlternating) {
  std::mt19937_64 rng(82);
  for (int t = 0; t < 5; ++t) {
    const auto prob = random_problem(rng, 6, 10);
    const auto s = canonical_structure<double>(6, 10);
    const auto W = WeightMatrix<double>::identity(60, 6);
    WsstlsConfig wc;
    wc.record_iterates = true;
    AltConfig ac;
    ac.record_iterates = true;
    const auto a = solve_wsstls(prob, s, W, RegularizationSpec(0.2), wc);
    const auto b = solve_stls_alternating(prob, RegularizationSpec(0.2), ac);
    ASSERT_EQ(a.x_iterates.size(), b.x_iterates.size());
    for (std::size_t i = 0; i < a.x_iterates.size(); ++i)
      EXPECT_LT((a.x_iterates[i] - b.x_iterates[i]).cwiseAbs().maxCoeff(), 1e-8);
    for (std::size_t i = 0; i < a.cost_trajectory.size(); ++i)
      EXPECT_NEAR(a.cost_trajectory[i], b.cost_trajectory[i], 1e-8 * (1 + b.cost_trajectory[i]));
  }
}

TEST(SolveWsstls, MonotoneAndStationary) {
  std::mt19937_64 rng(83);
  WsstlsConfig cfg;
  cfg.inner.tol = 1e-13;
  cfg.stationarity_tol = 5e-7;
  cfg.max_outer = 1000000;
  for (int t = 0; t < 10; ++t) {
    const auto s = stls::testing::random_structure(rng, 6, 8, 5, 6);
    const auto W = stls::testing::random_weight(rng, 5, 6);
    const auto prob = random_problem(rng, 6, 8);
    const RegularizationSpec reg(uniform(rng, 0.1, 1.0));
    const WsstlsContext<double> ctx(prob, s, W);
    const auto rep = solve_wsstls(ctx, reg, cfg);
    for (std::size_t i = 1; i < rep.cost_trajectory.size(); ++i)
      EXPECT_LE(rep.cost_trajectory[i], rep.cost_trajectory[i - 1] + 1e-12 * (1 + rep.cost_trajectory[i - 1]));
    EXPECT_TRUE(rep.converged);
    EXPECT_LT(wsstls_x_stationarity(ctx, rep.x_hat, rep.eps().eps_a, reg), 1e-6);
    EXPECT_LT((rep.eps().eps_a - eps_a_update(ctx, rep.x_hat)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(WsstlsContext, Validation) {
  std::mt19937_64 rng(84);
  const auto prob = random_problem(rng, 4, 3);
  const auto s = stls::testing::random_structure(rng, 4, 3, 2, 4);
  EXPECT_THROW(WsstlsContext<double>(prob, s, WeightMatrix<double>::identity(3, 4)), StructuralError);
  const auto wide = AffineStructure<double>(4, 3, {}, randn(rng, 4, 5));
  EXPECT_THROW(WsstlsContext<double>(prob, wide, WeightMatrix<double>::identity(0, 5)), StructuralError);
  const auto other = random_problem(rng, 5, 3);
  EXPECT_THROW(WsstlsContext<double>(other, s, WeightMatrix<double>::identity(2, 4)), StructuralError);
  WsstlsConfig cfg;
  cfg.stationarity_tol = -1.0;
  EXPECT_THROW(cfg.validate(), StructuralError);
}
