#include "stls/scenarios.hpp"

#include <numeric>
#include <set>

namespace stls {

namespace {

VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n, double var) {
  VectorXd v = VectorXd::Zero(n);
  if (var <= 0.0) return v;
  std::normal_distribution<double> nd(0.0, std::sqrt(var));
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n, double var) {
  MatrixXd M = MatrixXd::Zero(m, n);
  if (var <= 0.0) return M;
  std::normal_distribution<double> nd(0.0, std::sqrt(var));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) M(i, j) = nd(rng);
  return M;
}

}  // namespace

EivSpec EivSpec::testcase1() { return EivSpec{}; }

EivSpec EivSpec::testcase2() {
  EivSpec s;
  s.m = 20;
  s.n = 40;
  s.k_nonzero = 5;
  s.col_var = 1.0 / 20.0;
  s.pert_var = 0.0025 / 20.0;
  s.coeff = CoeffDist::gaussian();
  return s;
}

EivInstance gen_random_eiv(const EivSpec& spec, std::uint64_t seed) {
  require(spec.m >= 1 && spec.n >= 1, "gen_random_eiv: m and n must be positive");
  require(spec.k_nonzero >= 0 && spec.k_nonzero <= spec.n, "gen_random_eiv: k_nonzero must lie in [0, n]");
  require(spec.col_var > 0.0, "gen_random_eiv: col_var must be positive");
  require(spec.pert_var >= 0.0, "gen_random_eiv: pert_var must be nonnegative");
  std::mt19937_64 rng(seed);

  EivTruth t;
  t.seed = seed;
  t.A_true = gaussian_matrix(rng, spec.m, spec.n, spec.col_var);
  t.x_true = VectorXd::Zero(spec.n);
  if (spec.coeff.kind == CoeffDist::Kind::fixed_leading) {
    require(static_cast<Eigen::Index>(spec.coeff.values.size()) == spec.k_nonzero,
            "gen_random_eiv: fixed coefficients must list k_nonzero values");
    for (Eigen::Index i = 0; i < spec.k_nonzero; ++i) t.x_true(i) = spec.coeff.values[static_cast<std::size_t>(i)];
  } else {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(spec.n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < spec.k_nonzero; ++i) t.x_true(idx[static_cast<std::size_t>(i)]) = nd(rng);
  }
  t.E_A = gaussian_matrix(rng, spec.m, spec.n, spec.pert_var);
  t.e_y = gaussian_vector(rng, spec.m, spec.pert_var);

  VectorXd y = t.A_true * t.x_true - t.e_y;
  MatrixXd A = t.A_true - t.E_A;
  return EivInstance{ProblemInstance<double>(std::move(y), std::move(A)), std::move(t)};
}

Metrics eval_metrics(const VectorXd& x_hat, const VectorXd& x_true, double support_threshold) {
  require(x_hat.size() == x_true.size(), "eval_metrics: length mismatch");
  require(x_hat.size() >= 1, "eval_metrics: empty vectors");
  Metrics out;
  out.l2_err = (x_hat - x_true).norm();
  out.l1_err = (x_hat - x_true).lpNorm<1>();
  Eigen::Index diff = 0, nz = 0, z = 0, hit = 0, false_alarm = 0;
  for (Eigen::Index i = 0; i < x_hat.size(); ++i) {
    const bool est = std::abs(x_hat(i)) > support_threshold;
    const bool tru = std::abs(x_true(i)) > support_threshold;
    diff += est != tru;
    if (tru) {
      ++nz;
      hit += est;
    } else {
      ++z;
      false_alarm += est;
    }
  }
  out.l0_err_percent = 100.0 * static_cast<double>(diff) / static_cast<double>(x_hat.size());
  out.pd = nz > 0 ? static_cast<double>(hit) / static_cast<double>(nz) : 1.0;
  out.pfa = z > 0 ? static_cast<double>(false_alarm) / static_cast<double>(z) : 0.0;
  return out;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  require(lo > 0.0 && hi >= lo, "log_grid: need 0 < lo <= hi");
  require(count >= 1, "log_grid: count must be positive");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
  g.back() = hi;
  return g;
}

double select_lambda_cv(const ProblemInstance<double>& prob, const std::vector<double>& lambda_grid, int n_folds,
                        SolverKind kind, std::uint64_t seed, const AltConfig& cfg) {
  require(!lambda_grid.empty(), "select_lambda_cv: empty lambda grid");
  require(n_folds >= 2, "select_lambda_cv: need at least two folds");
  const Eigen::Index m = prob.m();
  require(m / n_folds >= 1, "select_lambda_cv: fold smaller than one row");
  if (lambda_grid.size() == 1) return lambda_grid.front();

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  struct Fold {
    ProblemInstance<double> train;
    VectorXd y_val;
    MatrixXd A_val;
  };
  std::vector<Fold> folds;
  for (int f = 0; f < n_folds; ++f) {
    const Eigen::Index lo = m * f / n_folds, hi = m * (f + 1) / n_folds;
    const Eigen::Index nv = hi - lo, nt = m - nv;
    VectorXd yt(nt), yv(nv);
    MatrixXd At(nt, prob.n()), Av(nv, prob.n());
    Eigen::Index it = 0, iv = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index row = perm[static_cast<std::size_t>(i)];
      if (i >= lo && i < hi) {
        yv(iv) = prob.y()(row);
        Av.row(iv++) = prob.A().row(row);
      } else {
        yt(it) = prob.y()(row);
        At.row(it++) = prob.A().row(row);
      }
    }
    folds.push_back(Fold{ProblemInstance<double>(std::move(yt), std::move(At)), std::move(yv), std::move(Av)});
  }

  double best_lambda = lambda_grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double lambda : lambda_grid) {
    double score = 0;
    for (const auto& fold : folds) {
      VectorXd x;
      if (kind == SolverKind::lasso) {
        x = lasso_cd<double>(fold.train.y(), fold.train.A(), lambda, VectorXd::Zero(prob.n()), cfg.inner).x;
      } else {
        x = solve_stls_alternating(fold.train, RegularizationSpec(lambda), cfg).x_hat;
      }
      score += (fold.y_val - fold.A_val * x).squaredNorm() / static_cast<double>(fold.y_val.size());
    }
    score /= n_folds;
    if (score < best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

VectorXd tls_estimate(const ProblemInstance<double>& prob) {
  require(prob.m() >= prob.n(), "tls_estimate: need m >= n");
  MatrixXd C(prob.m(), prob.n() + 1);
  C << prob.A(), prob.y();
  Eigen::BDCSVD<MatrixXd> svd(C, Eigen::ComputeFullV);
  const VectorXd v = svd.matrixV().col(prob.n());
  require(std::abs(v(prob.n())) > std::numeric_limits<double>::epsilon(), "tls_estimate: nongeneric TLS problem");
  return -v.head(prob.n()) / v(prob.n());
}

// ---------------------------------------------------------------------------
// cognitive radio

void CrScenario::validate() const {
  require(!grid_points.empty() && !receivers.empty() && !frequencies.empty(), "cr: empty grid, receivers or frequencies");
  require(n_bands >= 1, "cr: need at least one band");
  require(band_width > 0.0, "cr: band width must be positive");
  require(pathloss_exponent > 0.0, "cr: pathloss exponent must be positive");
  for (const auto& s : sources) {
    require(s.band >= 0 && s.band < n_bands, "cr: source band out of range");
    require(s.power >= 0.0, "cr: source power must be nonnegative");
  }
}

CrScenario CrScenario::testcase3() {
  CrScenario sc;
  for (int iy = 0; iy < 5; ++iy)
    for (int ix = 0; ix < 5; ++ix) sc.grid_points.push_back({0.1 + 0.2 * ix, 0.1 + 0.2 * iy});
  sc.receivers = {{0.2, 0.4}, {0.6, 0.4}, {0.6, 0.8}, {0.2, 0.8}};
  const int K = 128;
  for (int k = 0; k < K; ++k) sc.frequencies.push_back(15.0 + 15.0 * k / (K - 1));
  sc.sources = {CrSource{{0.4, 0.6}, 5, 10.0}};
  return sc;
}

double cr_gain(const std::array<double, 2>& from, const std::array<double, 2>& to, double exponent) {
  const double d = std::hypot(from[0] - to[0], from[1] - to[1]);
  require(d > 1e-12, "cr: receiver coincides with a transmitter location");
  return std::pow(d, -exponent);
}

double cr_basis(const CrScenario& sc, int nu, double f) {
  const double lo = sc.band_start + nu * sc.band_width;
  return (f >= lo && f < lo + sc.band_width) ? 1.0 : 0.0;
}

MatrixXd cr_matrix(const CrScenario& sc, const MatrixXd& gamma) {
  const auto Ng = static_cast<Eigen::Index>(sc.grid_points.size());
  const auto Nr = static_cast<Eigen::Index>(sc.receivers.size());
  const auto K = static_cast<Eigen::Index>(sc.frequencies.size());
  require(gamma.rows() == Ng && gamma.cols() == Nr, "cr_matrix: gain matrix must be N_g x N_r");
  MatrixXd A = MatrixXd::Zero(sc.m(), sc.n());
  for (Eigen::Index r = 0; r < Nr; ++r)
    for (Eigen::Index k = 0; k < K; ++k)
      for (Eigen::Index nu = 0; nu < sc.n_bands; ++nu) {
        const double b = cr_basis(sc, static_cast<int>(nu), sc.frequencies[static_cast<std::size_t>(k)]);
        if (b == 0.0) continue;
        for (Eigen::Index g = 0; g < Ng; ++g) A(cr_row(sc, r, k), cr_column(sc, g, nu)) = gamma(g, r) * b;
      }
  return A;
}

CrInstance gen_cr_scenario(const CrScenario& sc, int averaging_blocks, std::uint64_t seed) {
  sc.validate();
  require(averaging_blocks >= 1, "cr: averaging_blocks must be positive");
  const auto Ng = static_cast<Eigen::Index>(sc.grid_points.size());
  const auto Nr = static_cast<Eigen::Index>(sc.receivers.size());
  const auto K = static_cast<Eigen::Index>(sc.frequencies.size());
  std::mt19937_64 rng(seed);

  MatrixXd gamma(Ng, Nr);
  for (Eigen::Index g = 0; g < Ng; ++g)
    for (Eigen::Index r = 0; r < Nr; ++r)
      gamma(g, r) = cr_gain(sc.grid_points[static_cast<std::size_t>(g)], sc.receivers[static_cast<std::size_t>(r)],
                            sc.pathloss_exponent);

  CrTruth t;
  t.x_true = VectorXd::Zero(sc.n());
  t.eps_true = VectorXd::Zero(Ng * Nr);
  MatrixXd gamma_true = gamma;
  std::vector<double> eps_samples;
  for (const auto& s : sc.sources) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : sc.grid_points) best = std::min(best, std::hypot(p[0] - s.position[0], p[1] - s.position[1]));
    int chosen = -1;
    for (Eigen::Index g = 0; g < Ng; ++g) {
      const auto& p = sc.grid_points[static_cast<std::size_t>(g)];
      if (std::hypot(p[0] - s.position[0], p[1] - s.position[1]) > best + 1e-9) continue;
      t.nearest_grid.push_back(static_cast<int>(g));
      for (Eigen::Index r = 0; r < Nr; ++r)
        eps_samples.push_back(cr_gain(s.position, sc.receivers[static_cast<std::size_t>(r)], sc.pathloss_exponent) -
                              gamma(g, r));
      if (chosen < 0) chosen = static_cast<int>(g);
    }
    t.x_true(cr_column(sc, chosen, s.band)) += s.power;
    for (Eigen::Index r = 0; r < Nr; ++r) {
      const double gs = cr_gain(s.position, sc.receivers[static_cast<std::size_t>(r)], sc.pathloss_exponent);
      t.eps_true(cr_atom(sc, chosen, r)) = gs - gamma(chosen, r);
      gamma_true(chosen, r) = gs;
    }
  }
  t.A_true = cr_matrix(sc, gamma_true);

  // received signal PSD and receiver noise level
  VectorXd phi = VectorXd::Zero(sc.m());
  double in_band = 0;
  for (const auto& s : sc.sources)
    for (Eigen::Index r = 0; r < Nr; ++r) {
      const double gs = cr_gain(s.position, sc.receivers[static_cast<std::size_t>(r)], sc.pathloss_exponent);
      in_band += gs * s.power;
      for (Eigen::Index k = 0; k < K; ++k)
        phi(cr_row(sc, r, k)) += gs * s.power * cr_basis(sc, s.band, sc.frequencies[static_cast<std::size_t>(k)]);
    }
  in_band /= static_cast<double>(Nr);
  const double sigma2 = (in_band > 0 ? in_band : 1.0) / std::pow(10.0, sc.noise_snr_db / 10.0);
  t.noise_variance = sigma2;

  // averaged periodogram: unbiased with relative spread 1/sqrt(blocks)
  std::normal_distribution<double> nd(0.0, 1.0);
  VectorXd y(sc.m());
  for (Eigen::Index i = 0; i < sc.m(); ++i) {
    const double level = phi(i) + sigma2;
    y(i) = level + level / std::sqrt(static_cast<double>(averaging_blocks)) * nd(rng) - sigma2;
  }

  std::vector<SparseXd> atoms;
  atoms.reserve(static_cast<std::size_t>(Ng * Nr));
  for (Eigen::Index g = 0; g < Ng; ++g)
    for (Eigen::Index r = 0; r < Nr; ++r) {
      std::vector<Eigen::Triplet<double>> trip;
      for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index nu = 0; nu < sc.n_bands; ++nu) {
          const double b = cr_basis(sc, static_cast<int>(nu), sc.frequencies[static_cast<std::size_t>(k)]);
          if (b != 0.0) trip.emplace_back(cr_row(sc, r, k), cr_column(sc, g, nu), b);
        }
      SparseXd S(sc.m(), sc.n());
      S.setFromTriplets(trip.begin(), trip.end());
      atoms.push_back(std::move(S));
    }

  double var_eps = 0;
  for (double e : eps_samples) var_eps += e * e;
  // sources exactly on the grid carry no perturbation; unit weight then
  var_eps = var_eps > 0.0 ? var_eps / static_cast<double>(eps_samples.size()) : 1.0;

  AffineStructure<double> structure(sc.m(), sc.n(), std::move(atoms), MatrixXd::Identity(sc.m(), sc.m()));
  auto weight = WeightMatrix<double>::block_diagonal(1.0 / var_eps, Ng * Nr, 1.0, sc.m());
  return CrInstance{ProblemInstance<double>(std::move(y), cr_matrix(sc, gamma)), std::move(structure),
                    std::move(weight), std::move(t)};
}

// ---------------------------------------------------------------------------
// direction of arrival

void DoaScenario::validate() const {
  require(n_antennas >= 1 && n_grid >= 1, "doa: need antennas and grid points");
  require(spacing > 0.0, "doa: spacing must be positive");
  for (const auto& s : sources) require(std::abs(s.angle_deg) <= 90.0, "doa: source angle out of range");
}

DoaScenario DoaScenario::testcase4() {
  DoaScenario sc;
  sc.sources = {DoaSource{1.0, {1.0, 0.0}}, DoaSource{-9.0, {1.0, 0.0}}};
  return sc;
}

CVec<double> steering(int n_antennas, double spacing, double angle_rad) {
  const double alpha = 2.0 * kPi * spacing * std::sin(angle_rad);
  CVec<double> a(n_antennas);
  for (int i = 0; i < n_antennas; ++i) a(i) = std::polar(1.0, -alpha * i);
  return a;
}

CVec<double> steering_derivative(int n_antennas, double spacing, double angle_rad) {
  const double alpha = 2.0 * kPi * spacing * std::sin(angle_rad);
  const double beta = 2.0 * kPi * spacing * std::cos(angle_rad);
  CVec<double> phi(n_antennas);
  for (int i = 0; i < n_antennas; ++i) phi(i) = std::complex<double>(0.0, -beta * i) * std::polar(1.0, -alpha * i);
  return phi;
}

DoaInstance gen_doa_scenario(const DoaScenario& sc, std::uint64_t seed) {
  sc.validate();
  const int N = sc.n_antennas, G = sc.n_grid;
  std::mt19937_64 rng(seed);

  CMat<double> A(N, G);
  std::vector<CMat<double>> atoms;
  atoms.reserve(static_cast<std::size_t>(G));
  for (int g = 0; g < G; ++g) {
    const double th = deg2rad(sc.grid_angle_deg(g));
    A.col(g) = steering(N, sc.spacing, th);
    CMat<double> S = CMat<double>::Zero(N, G);
    S.col(g) = steering_derivative(N, sc.spacing, th);
    atoms.push_back(std::move(S));
  }

  DoaTruth t;
  CVec<double> x = CVec<double>::Zero(G);
  CVec<double> y = CVec<double>::Zero(N);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  for (const auto& s : sc.sources) {
    std::complex<double> amp = s.amplitude;
    if (sc.random_phase) amp = std::polar(std::abs(s.amplitude), phase(rng));
    y += amp * steering(N, sc.spacing, deg2rad(s.angle_deg));
    double best = std::numeric_limits<double>::infinity();
    for (int g = 0; g < G; ++g) best = std::min(best, std::abs(sc.grid_angle_deg(g) - s.angle_deg));
    std::vector<int> near;
    for (int g = 0; g < G; ++g)
      if (std::abs(sc.grid_angle_deg(g) - s.angle_deg) <= best + 1e-9) near.push_back(g);
    x(near.front()) += amp;
    t.nearest_grid.push_back(std::move(near));
    t.angles_deg.push_back(s.angle_deg);
  }
  const double sigma2 = std::pow(10.0, -sc.snr_db / 10.0);
  t.noise_variance = sigma2;
  std::normal_distribution<double> nd(0.0, std::sqrt(sigma2 / 2.0));
  for (int i = 0; i < N; ++i) y(i) += std::complex<double>(nd(rng), nd(rng));

  CMat<double> vec_atoms(N, 2 * N);
  vec_atoms << CMat<double>::Identity(N, N), std::complex<double>(0.0, 1.0) * CMat<double>::Identity(N, N);
  auto lifted = complex_to_real_lift<double>(y, A, atoms, vec_atoms);
  t.x_true = lift_vector<double>(x);

  const double var_eps = deg2rad(1.0) * deg2rad(1.0) / 3.0;
  auto weight = WeightMatrix<double>::block_diagonal(1.0 / var_eps, G, 2.0 / sigma2, 2 * N);
  return DoaInstance{std::move(lifted.problem), std::move(lifted.structure), std::move(weight),
                     std::move(lifted.groups), std::move(t)};
}

}  // namespace stls
