#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace stls;

TEST(GenRandomEiv, Presets) {
  const auto t1 = EivSpec::testcase1();
  EXPECT_EQ(t1.m, 6);
  EXPECT_EQ(t1.n, 10);
  EXPECT_DOUBLE_EQ(t1.col_var, 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(t1.pert_var, 0.0025 / 6.0);
  const auto inst = gen_random_eiv(t1, 3);
  EXPECT_DOUBLE_EQ(inst.truth.x_true(0), -1.3);
  EXPECT_DOUBLE_EQ(inst.truth.x_true(1), 5.0);
  EXPECT_EQ(inst.truth.x_true.tail(8), VectorXd::Zero(8));

  const auto t2 = EivSpec::testcase2();
  const auto inst2 = gen_random_eiv(t2, 3);
  EXPECT_EQ(inst2.problem.m(), 20);
  EXPECT_EQ(inst2.problem.n(), 40);
  EXPECT_EQ((inst2.truth.x_true.array() != 0).count(), 5);
}

TEST(GenRandomEiv, TruthReconstructsData) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = gen_random_eiv(EivSpec::testcase2(), seed);
    const auto& t = inst.truth;
    EXPECT_EQ(inst.problem.y(), VectorXd(t.A_true * t.x_true - t.e_y));
    EXPECT_EQ(inst.problem.A(), MatrixXd(t.A_true - t.E_A));
    EXPECT_EQ(t.seed, seed);
  }
}

TEST(GenRandomEiv, NoPerturbation) {
  auto spec = EivSpec::testcase2();
  spec.pert_var = 0.0;
  const auto inst = gen_random_eiv(spec, 5);
  EXPECT_EQ(inst.problem.A(), inst.truth.A_true);
  EXPECT_EQ(inst.problem.y(), VectorXd(inst.truth.A_true * inst.truth.x_true));
}

TEST(GenRandomEiv, Reproducible) {
  const auto a = gen_random_eiv(EivSpec::testcase2(), 42), b = gen_random_eiv(EivSpec::testcase2(), 42);
  EXPECT_EQ(a.problem.y(), b.problem.y());
  EXPECT_EQ(a.problem.A(), b.problem.A());
  const auto c = gen_random_eiv(EivSpec::testcase2(), 43);
  EXPECT_NE(a.problem.y(), c.problem.y());
}

TEST(GenRandomEiv, Validation) {
  auto spec = EivSpec::testcase2();
  spec.k_nonzero = 41;
  EXPECT_THROW(gen_random_eiv(spec, 0), StructuralError);
  spec = EivSpec::testcase1();
  spec.col_var = 0;
  EXPECT_THROW(gen_random_eiv(spec, 0), StructuralError);
}

TEST(EvalMetrics, Examples) {
  const VectorXd xo = Eigen::Vector3d(1, 1, 0);
  const auto same = eval_metrics(xo, xo);
  EXPECT_EQ(same.l2_err, 0.0);
  EXPECT_EQ(same.l1_err, 0.0);
  EXPECT_EQ(same.l0_err_percent, 0.0);
  EXPECT_EQ(same.pd, 1.0);
  EXPECT_EQ(same.pfa, 0.0);

  const auto half = eval_metrics(Eigen::Vector3d(1, 0, 0), xo);
  EXPECT_NEAR(half.l0_err_percent, 33.33, 0.01);
  EXPECT_DOUBLE_EQ(half.pd, 0.5);
  EXPECT_DOUBLE_EQ(half.pfa, 0.0);

  VectorXd x5 = VectorXd::Zero(10);
  x5.head(3) << 1, -2, 3;
  const auto zero = eval_metrics(VectorXd::Zero(10), x5);
  EXPECT_EQ(zero.pd, 0.0);
  EXPECT_EQ(zero.pfa, 0.0);
  EXPECT_DOUBLE_EQ(zero.l0_err_percent, 30.0);

  const auto fa = eval_metrics(Eigen::Vector4d(1, 0, 1, 1), Eigen::Vector4d(1, 0, 0, 0));
  EXPECT_DOUBLE_EQ(fa.pfa, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(fa.l2_err, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(fa.l1_err, 2.0);
}

TEST(LogGrid, EndpointsAndSpacing) {
  const auto g = log_grid(1e-3, 10.0, 20);
  ASSERT_EQ(g.size(), 20u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-3);
  EXPECT_DOUBLE_EQ(g.back(), 10.0);
  for (std::size_t i = 2; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
}

TEST(SelectLambdaCv, SingleCandidate) {
  const auto inst = gen_random_eiv(EivSpec::testcase2(), 1);
  EXPECT_EQ(select_lambda_cv(inst.problem, {0.37}, 5, SolverKind::lasso, 0), 0.37);
  EXPECT_THROW(select_lambda_cv(inst.problem, {}, 5, SolverKind::lasso, 0), StructuralError);
  EXPECT_THROW(select_lambda_cv(inst.problem, {0.1, 0.2}, 1, SolverKind::lasso, 0), StructuralError);
  EXPECT_THROW(select_lambda_cv(inst.problem, {0.1, 0.2}, 21, SolverKind::lasso, 0), StructuralError);
}

TEST(SelectLambdaCv, NoiselessPrefersTinyLambda) {
  EivSpec spec;
  spec.m = 20;
  spec.n = 8;
  spec.k_nonzero = 3;
  spec.col_var = 1.0 / 20;
  spec.pert_var = 0;
  spec.coeff = CoeffDist::gaussian();
  const auto inst = gen_random_eiv(spec, 2);
  EXPECT_EQ(select_lambda_cv(inst.problem, {1e-9, 0.1, 1.0}, 5, SolverKind::lasso, 0), 1e-9);
  EXPECT_EQ(select_lambda_cv(inst.problem, {1e-9, 0.1, 1.0}, 5, SolverKind::stls_alt, 0), 1e-9);
}

TEST(SelectLambdaCv, InteriorOnTestCase2Grid) {
  const auto grid = log_grid(1e-3, 3.0, 20);
  int interior = 0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    const auto inst = gen_random_eiv(EivSpec::testcase2(), static_cast<std::uint64_t>(s));
    const double l = select_lambda_cv(inst.problem, grid, 5, SolverKind::lasso, static_cast<std::uint64_t>(s));
    interior += l != grid.front() && l != grid.back();
  }
  EXPECT_GE(interior, (9 * runs + 9) / 10);
}

TEST(TlsEstimate, RecoversNoiselessSolution) {
  std::mt19937_64 rng(90);
  const MatrixXd A = stls::testing::randn(rng, 8, 4);
  const VectorXd x = stls::testing::randn(rng, 4);
  const VectorXd est = tls_estimate(ProblemInstance<double>(A * x, A));
  EXPECT_LT((est - x).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(tls_estimate(ProblemInstance<double>(VectorXd::Zero(3), MatrixXd::Ones(3, 4))), StructuralError);
}

// ---------------------------------------------------------------------------
// cognitive radio

TEST(CrScenario, Testcase3Preset) {
  const auto sc = CrScenario::testcase3();
  EXPECT_EQ(sc.receivers.size(), 4u);
  EXPECT_EQ(sc.grid_points.size(), 25u);
  EXPECT_EQ(sc.frequencies.size(), 128u);
  EXPECT_EQ(sc.n_bands, 16);
  EXPECT_DOUBLE_EQ(sc.frequencies.front(), 15.0);
  EXPECT_DOUBLE_EQ(sc.frequencies.back(), 30.0);
  ASSERT_EQ(sc.sources.size(), 1u);
  EXPECT_EQ(sc.sources[0].band, 5);
  EXPECT_EQ(sc.n(), 400);
  EXPECT_EQ(sc.m(), 512);
}

TEST(CrScenario, SingleGridPointExample) {
  CrScenario sc;
  sc.grid_points = {{0.0, 0.0}};
  sc.receivers = {{1.0, 0.0}};
  sc.frequencies = {15.25, 15.5, 15.75};
  sc.n_bands = 1;
  sc.sources = {CrSource{{0.0, 0.0}, 0, 2.0}};
  sc.noise_snr_db = 300;
  const auto inst = gen_cr_scenario(sc, 2'000'000'000, 1);
  EXPECT_EQ(inst.problem.A(), MatrixXd::Ones(3, 1));  // gamma = 1 at unit distance
  EXPECT_LT((inst.problem.y() - VectorXd::Constant(3, 2.0)).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_EQ(inst.truth.x_true, VectorXd::Constant(1, 2.0));
}

TEST(CrScenario, ZeroPowerGivesNoiseOnly) {
  auto sc = CrScenario::testcase3();
  sc.sources[0].power = 0.0;
  const auto inst = gen_cr_scenario(sc, 100000, 4);
  EXPECT_LT(std::abs(inst.problem.y().mean()), 0.01);
  EXPECT_LT(inst.problem.y().cwiseAbs().maxCoeff(), 0.05);
}

TEST(CrScenario, AffineIdentity) {
  const auto sc = CrScenario::testcase3();
  const auto inst = gen_cr_scenario(sc, 100, 7);
  const MatrixXd corrected = inst.problem.A() + inst.structure.combine_matrix_atoms(inst.truth.eps_true);
  EXPECT_LT((corrected - inst.truth.A_true).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(inst.structure.n_a(), 100);
  EXPECT_TRUE(inst.weight.is_diagonal());
  EXPECT_EQ(inst.truth.nearest_grid, (std::vector<int>{11, 12, 16, 17}));  // source equidistant from four grid points
}

TEST(CrScenario, RejectsCoincidentReceiver) {
  auto sc = CrScenario::testcase3();
  sc.receivers.push_back(sc.grid_points[3]);
  EXPECT_THROW(gen_cr_scenario(sc, 10, 0), StructuralError);
}

TEST(CrScenario, Reproducible) {
  const auto sc = CrScenario::testcase3();
  EXPECT_EQ(gen_cr_scenario(sc, 100, 3).problem.y(), gen_cr_scenario(sc, 100, 3).problem.y());
}

// ---------------------------------------------------------------------------
// direction of arrival

TEST(Doa, BroadsideSteeringIsOnes) {
  const auto a = steering(8, 0.5, 0.0);
  EXPECT_LT((a - CVec<double>::Ones(8)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Doa, DerivativeAtBroadside) {
  const auto phi = steering_derivative(3, 0.5, 0.0);
  EXPECT_LT(std::abs(phi(0)), 1e-15);
  EXPECT_LT(std::abs(phi(1) - std::complex<double>(0, -kPi)), 1e-14);
  EXPECT_LT(std::abs(phi(2) - std::complex<double>(0, -2 * kPi)), 1e-14);
}

TEST(Doa, LinearizationErrorBound) {
  const auto sc = DoaScenario::testcase4();
  double worst = 0;
  for (int g = 0; g < sc.n_grid; ++g) {
    const double th = deg2rad(sc.grid_angle_deg(g));
    const auto a = steering(sc.n_antennas, sc.spacing, th);
    const auto phi = steering_derivative(sc.n_antennas, sc.spacing, th);
    for (double e = -1.0; e <= 1.0; e += 0.05) {
      const double er = deg2rad(e);
      const auto exact = steering(sc.n_antennas, sc.spacing, th + er);
      worst = std::max(worst, (exact - a - er * phi).norm() / exact.norm());
    }
  }
  EXPECT_LE(worst, 0.05);
}

TEST(Doa, Testcase4Instance) {
  const auto sc = DoaScenario::testcase4();
  const auto inst = gen_doa_scenario(sc, 1);
  EXPECT_EQ(inst.problem.m(), 16);
  EXPECT_EQ(inst.problem.n(), 180);
  EXPECT_EQ(inst.structure.n_a(), 90);
  EXPECT_EQ(inst.structure.n_y(), 16);
  EXPECT_EQ(inst.groups.size(), 90u);
  ASSERT_EQ(inst.truth.nearest_grid.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s)
    for (int g : inst.truth.nearest_grid[s])
      EXPECT_NEAR(std::abs(sc.grid_angle_deg(g) - inst.truth.angles_deg[s]), 1.0, 1e-9);
  int nonzero = 0;
  for (int g = 0; g < 90; ++g) nonzero += complex_magnitude(inst.truth.x_true, g) > 0;
  EXPECT_EQ(nonzero, 2);
  EXPECT_EQ(inst.problem.y(), gen_doa_scenario(sc, 1).problem.y());
}

TEST(Doa, AtomsCarryDerivativeColumn) {
  const auto sc = DoaScenario::testcase4();
  const auto inst = gen_doa_scenario(sc, 2);
  const int g = 37;
  const MatrixXd S = inst.structure.matrix_atom(g);
  const auto phi = steering_derivative(sc.n_antennas, sc.spacing, deg2rad(sc.grid_angle_deg(g)));
  const CMat<double> unl = unlift_matrix<double>(S);
  EXPECT_LT((unl.col(g) - phi).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(unl.cwiseAbs().sum(), unl.col(g).cwiseAbs().sum());
}
