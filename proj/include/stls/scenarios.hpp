#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stls/wsstls.hpp"

namespace stls {

// ---------------------------------------------------------------------------
// random EIV model  y = A_o x_o - e_y,  A = A_o - E_A

struct EivTruth {
  VectorXd x_true;
  MatrixXd A_true;
  MatrixXd E_A;
  VectorXd e_y;
  std::uint64_t seed = 0;
};

/// Nonzero coefficient values: a fixed list placed at the leading indices, or
/// i.i.d. standard Gaussian values at uniformly random positions.
struct CoeffDist {
  enum class Kind { fixed_leading, gaussian_random_support } kind = Kind::gaussian_random_support;
  std::vector<double> values;

  static CoeffDist fixed(std::vector<double> v) { return {Kind::fixed_leading, std::move(v)}; }
  static CoeffDist gaussian() { return {Kind::gaussian_random_support, {}}; }
};

struct EivSpec {
  Eigen::Index m = 6;
  Eigen::Index n = 10;
  Eigen::Index k_nonzero = 2;
  double col_var = 1.0 / 6.0;
  double pert_var = 0.0025 / 6.0;
  CoeffDist coeff = CoeffDist::fixed({-1.3, 5.0});

  static EivSpec testcase1();
  static EivSpec testcase2();
};

struct EivInstance {
  ProblemInstance<double> problem;
  EivTruth truth;
};

EivInstance gen_random_eiv(const EivSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// metrics and lambda selection

struct Metrics {
  double l2_err = 0;
  double l1_err = 0;
  double l0_err_percent = 0;
  double pd = 0;
  double pfa = 0;
};

Metrics eval_metrics(const VectorXd& x_hat, const VectorXd& x_true, double support_threshold = 1e-6);

/// count log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

enum class SolverKind { lasso, stls_alt };

/// K-fold cross-validation over rows; folds come from a seeded shuffle.
double select_lambda_cv(const ProblemInstance<double>& prob, const std::vector<double>& lambda_grid, int n_folds,
                        SolverKind kind, std::uint64_t seed, const AltConfig& cfg = {});

/// Plain TLS estimate from the right singular vector of [A y] belonging to the
/// smallest singular value. Requires m >= n and a nonzero last entry.
VectorXd tls_estimate(const ProblemInstance<double>& prob);

// ---------------------------------------------------------------------------
// cognitive-radio spectrum sensing

struct CrSource {
  std::array<double, 2> position{};
  int band = 0;  ///< zero-based index of the active band
  double power = 1.0;
};

struct CrScenario {
  std::vector<std::array<double, 2>> grid_points;
  std::vector<std::array<double, 2>> receivers;
  std::vector<double> frequencies;  ///< MHz
  double band_start = 15.0;         ///< MHz, lower edge of band 0
  double band_width = 1.0;          ///< MHz
  int n_bands = 16;
  double pathloss_exponent = 0.5;
  std::vector<CrSource> sources;
  double noise_snr_db = 0.0;

  Eigen::Index n() const { return static_cast<Eigen::Index>(n_bands * grid_points.size()); }
  Eigen::Index m() const { return static_cast<Eigen::Index>(frequencies.size() * receivers.size()); }
  void validate() const;

  static CrScenario testcase3();
};

struct CrTruth {
  VectorXd x_true;
  MatrixXd A_true;          ///< gains taken at the true source positions
  VectorXd eps_true;        ///< gamma_sr - gamma_gr for each (g, r) atom
  std::vector<int> nearest_grid;  ///< per source, closest grid indices (ties included)
  double noise_variance = 0;
};

struct CrInstance {
  ProblemInstance<double> problem;
  AffineStructure<double> structure;
  WeightMatrix<double> weight;
  CrTruth truth;
};

/// Column index of coefficient (grid g, band nu).
inline Eigen::Index cr_column(const CrScenario& sc, Eigen::Index g, Eigen::Index nu) { return g * sc.n_bands + nu; }
/// Row index of sample (receiver r, frequency k).
inline Eigen::Index cr_row(const CrScenario& sc, Eigen::Index r, Eigen::Index k) {
  return r * static_cast<Eigen::Index>(sc.frequencies.size()) + k;
}
/// Atom index of pair (grid g, receiver r).
inline Eigen::Index cr_atom(const CrScenario& sc, Eigen::Index g, Eigen::Index r) {
  return g * static_cast<Eigen::Index>(sc.receivers.size()) + r;
}

double cr_gain(const std::array<double, 2>& from, const std::array<double, 2>& to, double exponent);
double cr_basis(const CrScenario& sc, int nu, double f);
/// Regression matrix of the model for gains gamma(g, r).
MatrixXd cr_matrix(const CrScenario& sc, const MatrixXd& gamma);

CrInstance gen_cr_scenario(const CrScenario& sc, int averaging_blocks, std::uint64_t seed);

// ---------------------------------------------------------------------------
// direction of arrival with a uniform linear array

struct DoaSource {
  double angle_deg = 0;
  std::complex<double> amplitude{1.0, 0.0};
};

struct DoaScenario {
  int n_antennas = 8;
  int n_grid = 90;
  double spacing = 0.5;  ///< wavelengths
  std::vector<DoaSource> sources;
  double snr_db = 20.0;
  bool random_phase = true;  ///< replace each amplitude phase by a seeded uniform draw

  /// Grid angle g (zero based) in degrees: -90 + 180 (g + 1) / n_grid.
  double grid_angle_deg(int g) const { return -90.0 + 180.0 * (g + 1) / n_grid; }
  void validate() const;

  static DoaScenario testcase4();
};

struct DoaTruth {
  VectorXd x_true;                       ///< lifted [Re; Im]
  std::vector<std::vector<int>> nearest_grid;  ///< per source, closest grid indices (ties included)
  std::vector<double> angles_deg;
  double noise_variance = 0;  ///< complex noise variance per antenna
};

struct DoaInstance {
  ProblemInstance<double> problem;
  AffineStructure<double> structure;
  WeightMatrix<double> weight;
  GroupMap groups;
  DoaTruth truth;
};

CVec<double> steering(int n_antennas, double spacing, double angle_rad);
/// First-order derivative column of the steering vector with respect to angle.
CVec<double> steering_derivative(int n_antennas, double spacing, double angle_rad);

DoaInstance gen_doa_scenario(const DoaScenario& sc, std::uint64_t seed);

/// Modulus of complex coefficient g from a lifted vector.
inline double complex_magnitude(const VectorXd& x_lifted, Eigen::Index g) {
  const Eigen::Index n = x_lifted.size() / 2;
  return std::hypot(x_lifted(g), x_lifted(n + g));
}

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace stls
