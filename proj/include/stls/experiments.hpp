#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stls/scenarios.hpp"
#include "stls/stls_global.hpp"

namespace stls {

/// Worker count from STLS_THREADS; 0 or unset means sequential.
int threads_from_env();

/// Calls body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots so output does not depend on scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

// ---------------------------------------------------------------------------
// random EIV, global vs alternating

struct AltAtL1 {
  SolveReport<double> report;
  double lambda = 0;
};

/// Alternating solver with lambda bisected (in log scale) until ||x||_1 = mu.
/// When even the smallest lambda gives ||x||_1 < mu that solution is returned.
AltAtL1 alternating_at_l1_radius(const ProblemInstance<double>& prob, double mu, const AltConfig& cfg = {});

/// min of ||y - Ax||^2 / (1 + ||x||^2) over ||x||_1 = mu with x supported on the
/// two given indices; dense search on the rhombus boundary plus golden refinement.
double genie_fractional_cost(const ProblemInstance<double>& prob, std::array<Eigen::Index, 2> support, double mu);

struct Tc1Options {
  std::uint64_t seed = 0;
  std::vector<double> eps = {1.0, 0.1, 0.01, 0.001};
  double delta = 1e-4;
  double mu = 5.0;
  BbConfig bb;
};

struct Tc1Row {
  double eps = 0;
  double f_bisection = 0;
  double f_alternating = 0;
  double f_genie = 0;
  int iterations = 0;
  int iteration_bound = 0;
  long nodes = 0;
  double seconds = 0;
};

struct Tc1Result {
  EivInstance instance;
  std::vector<Tc1Row> rows;
  VectorXd x_bisection;  ///< at the last (smallest) eps
  AltAtL1 alternating;
};

Tc1Result run_testcase1(const Tc1Options& opt);

// ---------------------------------------------------------------------------
// support recovery over a lambda grid, and ROC against plain TLS

struct Tc2Options {
  int mc = 200;
  std::uint64_t seed = 0;
  int n_lambda = 20;
  double lambda_lo = 1e-3;
  double lambda_hi = 3.0;
  int roc_mc = 200;
  int cv_folds = 5;
  int threads = 0;
  double support_threshold = 1e-6;
  EivSpec spec = EivSpec::testcase2();
  EivSpec roc_spec;  ///< square instance for the ROC
  AltConfig alt;

  Tc2Options();
};

struct Tc2LambdaRow {
  double lambda = 0;
  Metrics lasso;  ///< means over runs
  Metrics stls;
  double l0_diff_mean = 0;  ///< mean of per-run (stls - lasso) l0 error, percent
  double l0_diff_se = 0;    ///< standard error of that mean
};

struct RocPoint {
  double pfa = 0;
  double pd = 0;
};

/// Mean ROC over runs for one estimator, plus per-run P_d at the reference P_fa.
struct RocCurve {
  std::string method;
  std::vector<double> thresholds;
  std::vector<RocPoint> points;
  std::vector<double> pd_at_ref;
  double mean_pd_at_ref = 0;
};

struct Tc2Result {
  std::vector<Tc2LambdaRow> rows;
  std::vector<RocCurve> roc;  ///< stls, lasso, tls
  double roc_reference_pfa = 0.1;
  double runtime_seconds = 0;
};

/// P_d at `pfa` from an ROC polyline. The curve is completed with (0,0) and
/// (1,1) and made monotone before linear interpolation.
double pd_at_pfa(std::vector<RocPoint> points, double pfa);

/// Per-run ROC of the magnitudes |x_hat| against the true support.
std::vector<RocPoint> roc_points(const VectorXd& x_hat, const VectorXd& x_true, const std::vector<double>& thresholds);

Tc2Result run_testcase2(const Tc2Options& opt);

// ---------------------------------------------------------------------------
// cognitive-radio sensing

struct Tc3Options {
  std::uint64_t seed = 0;
  int averaging_blocks = 100;
  double lambda = 400.0;
  double support_threshold = 1e-6;
  CrScenario scenario = CrScenario::testcase3();
  WsstlsConfig wsstls;
};

struct Tc3Estimate {
  VectorXd x;
  std::vector<int> active_locations;  ///< grid points with any nonzero band coefficient
  bool energy_in_source_bands = false;
};

struct Tc3Result {
  CrInstance instance;
  SolveReport<double> report;
  Tc3Estimate wsstls;
  Tc3Estimate lasso;
  std::array<double, 2> refined_position{};  ///< zoom-in estimate from the strongest WSS-TLS location
  std::vector<std::array<double, 2>> zoom_grid;
  std::vector<double> zoom_correlation;
};

/// Pearson correlation of the corrected gains against each candidate on a
/// 5 x 5 grid spanning +-0.2 around `centre`; returns the best candidate.
std::array<double, 2> cr_zoom_refine(const CrScenario& sc, const VectorXd& gains, std::array<double, 2> centre,
                                     std::vector<std::array<double, 2>>* grid = nullptr,
                                     std::vector<double>* correlation = nullptr);

Tc3Result run_testcase3(const Tc3Options& opt);

// ---------------------------------------------------------------------------
// direction of arrival

struct Tc4Options {
  std::uint64_t seed = 0;
  double lambda = 800.0;
  double support_threshold = 1e-6;
  DoaScenario scenario = DoaScenario::testcase4();
  WsstlsConfig wsstls;
};

struct Tc4Result {
  DoaInstance instance;
  SolveReport<double> report;
  VectorXd x_lasso;
  std::vector<int> active_wsstls;
  std::vector<int> active_lasso;
  std::vector<double> corrected_deg;  ///< theta_g + eps_g for each active WSS-TLS grid point
  bool support_at_nearest = false;    ///< one active point per source, each at a nearest grid angle
  double max_angle_error_deg = 0;     ///< over matched sources; inf when support_at_nearest is false
};

Tc4Result run_testcase4(const Tc4Options& opt);

}  // namespace stls
