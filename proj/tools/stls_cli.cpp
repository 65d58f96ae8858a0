// stls: solve, generate and reproduce the sparse TLS experiments.

#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "stls/stls.hpp"

namespace fs = std::filesystem;
using stls::io::json;

namespace {

struct Common {
  std::string out = "out";
  std::uint64_t seed = 0;
};

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path prepare(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

json envelope(const std::string& command, json config, double seconds) {
  return json{{"command", command}, {"config", std::move(config)}, {"wall_time_s", seconds}};
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
  std::string problem;
  std::string solver = "stls-alt";
  double lambda = 0.0;
  double mu = 1.0;
  double eps = 1e-3;
  double delta = 1e-4;
  double tol = 1e-10;
  int max_outer = 500;
  std::string truth;
  double threshold = 1e-6;
};

json run_solve(const SolveArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto pf = stls::io::load_problem(a.problem);
  const auto& prob = pf.problem;
  stls::AltConfig alt;
  alt.cost_tol_rel = a.tol;
  alt.max_outer = a.max_outer;
  const stls::RegularizationSpec reg =
      pf.groups ? stls::RegularizationSpec(a.lambda, *pf.groups) : stls::RegularizationSpec(a.lambda);

  json config{{"problem", a.problem}, {"solver", a.solver}, {"lambda", a.lambda}, {"tol", a.tol},
              {"max_outer", a.max_outer}};
  json result;
  stls::VectorXd x_hat;
  if (a.solver == "lasso") {
    const auto cd = stls::lasso_cd<double>(prob.y(), prob.A(), reg, stls::VectorXd::Zero(prob.n()), alt.inner);
    stls::SolveReport<double> rep;
    rep.x_hat = cd.x;
    rep.perturbation = stls::MatrixPerturbation<double>{stls::MatrixXd::Zero(prob.m(), prob.n())};
    rep.final_cost = stls::lasso_objective<double>(prob.y(), prob.A(), cd.x, reg);
    rep.cost_trajectory = {rep.final_cost};
    rep.outer_iterations = cd.sweeps;
    rep.converged = cd.converged;
    result = stls::io::to_json(rep);
    x_hat = rep.x_hat;
  } else if (a.solver == "stls-alt") {
    const auto rep = stls::solve_stls_alternating(prob, reg, alt);
    result = stls::io::to_json(rep);
    x_hat = rep.x_hat;
  } else if (a.solver == "stls-global") {
    config["mu"] = a.mu;
    config["eps"] = a.eps;
    config["delta"] = a.delta;
    const auto bis = stls::bisection_solve<double>(prob, a.mu, a.eps, a.delta);
    stls::SolveReport<double> rep;
    rep.x_hat = bis.x_star;
    rep.perturbation = stls::MatrixPerturbation<double>{stls::e_update(prob, bis.x_star)};
    double best = bis.u0;
    for (const auto& h : bis.history) rep.cost_trajectory.push_back(best = std::min(best, h.f));
    if (rep.cost_trajectory.empty()) rep.cost_trajectory.push_back(bis.f_star);
    rep.final_cost = rep.cost_trajectory.back();
    rep.outer_iterations = bis.iterations;
    rep.converged = bis.bb_converged;
    result = stls::io::to_json(rep);
    result["bisection"] = json{{"lower", bis.lower},
                               {"upper", bis.upper},
                               {"u0", bis.u0},
                               {"iteration_bound", bis.iteration_bound}};
    x_hat = rep.x_hat;
  } else if (a.solver == "wsstls") {
    stls::require(pf.structure.has_value(), "solve: wsstls needs atoms in the problem file");
    const auto W = pf.weight ? *pf.weight
                             : stls::WeightMatrix<double>::identity(pf.structure->n_a(), pf.structure->n_y());
    stls::WsstlsConfig cfg;
    cfg.cost_tol_rel = a.tol;
    cfg.max_outer = a.max_outer;
    const auto rep = stls::solve_wsstls(prob, *pf.structure, W, reg, cfg);
    result = stls::io::to_json(rep);
    x_hat = rep.x_hat;
  } else if (a.solver == "matrix-stls") {
    const stls::MatrixXd Y = pf.Y ? *pf.Y : stls::MatrixXd(prob.y());
    const auto res = stls::solve_matrix_stls<double>(Y, prob.A(), a.lambda, alt);
    json traj = json::array();
    for (double v : res.cost_trajectory) traj.push_back(v);
    x_hat = res.X.col(0);
    result = json{{"x_hat", stls::io::to_json(x_hat)},
                  {"X", {{"rows", res.X.rows()}, {"cols", res.X.cols()}, {"values", stls::io::to_json(res.X)}}},
                  {"e_hat", {{"rows", res.E.rows()}, {"cols", res.E.cols()}, {"values", stls::io::to_json(res.E)}}},
                  {"cost_trajectory", traj},
                  {"outer_iterations", res.outer_iterations},
                  {"converged", res.converged},
                  {"final_cost", res.cost_trajectory.back()}};
  } else {
    throw stls::StructuralError("solve: unknown solver '" + a.solver + "'");
  }

  const auto dir = prepare(c.out);
  stls::io::write_vector_csv(dir / "x_hat.csv", x_hat, "x_hat");
  json rep = envelope("solve", std::move(config), 0.0);
  rep["report"] = std::move(result);
  if (!a.truth.empty()) {
    const auto xt = stls::io::load_vector_csv(a.truth);
    rep["metrics"] = stls::io::to_json(stls::eval_metrics(x_hat, xt, a.threshold));
  }
  rep["wall_time_s"] = elapsed(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// gen

json run_gen(const std::string& preset, int blocks, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = prepare(c.out);
  json problem, truth;
  stls::VectorXd x_true;
  if (preset == "testcase1" || preset == "testcase2") {
    const auto spec = preset == "testcase1" ? stls::EivSpec::testcase1() : stls::EivSpec::testcase2();
    const auto inst = stls::gen_random_eiv(spec, c.seed);
    problem = stls::io::problem_to_json(inst.problem);
    x_true = inst.truth.x_true;
    truth = json{{"x_true", stls::io::to_json(inst.truth.x_true)},
                 {"A_true", stls::io::to_json(inst.truth.A_true)},
                 {"E_A", stls::io::to_json(inst.truth.E_A)},
                 {"e_y", stls::io::to_json(inst.truth.e_y)},
                 {"seed", inst.truth.seed}};
  } else if (preset == "testcase3") {
    const auto inst = stls::gen_cr_scenario(stls::CrScenario::testcase3(), blocks, c.seed);
    problem = stls::io::problem_to_json(inst.problem);
    problem["atoms"] = stls::io::structure_to_json(inst.structure);
    problem["W"] = stls::io::weight_to_json(inst.weight);
    x_true = inst.truth.x_true;
    truth = json{{"x_true", stls::io::to_json(inst.truth.x_true)},
                 {"eps_true", stls::io::to_json(inst.truth.eps_true)},
                 {"nearest_grid", inst.truth.nearest_grid},
                 {"noise_variance", inst.truth.noise_variance}};
  } else if (preset == "testcase4") {
    const auto inst = stls::gen_doa_scenario(stls::DoaScenario::testcase4(), c.seed);
    problem = stls::io::problem_to_json(inst.problem);
    problem["atoms"] = stls::io::structure_to_json(inst.structure);
    problem["W"] = stls::io::weight_to_json(inst.weight);
    problem["groups"] = stls::io::groups_to_json(inst.groups);
    x_true = inst.truth.x_true;
    truth = json{{"x_true", stls::io::to_json(inst.truth.x_true)},
                 {"nearest_grid", inst.truth.nearest_grid},
                 {"angles_deg", inst.truth.angles_deg},
                 {"noise_variance", inst.truth.noise_variance}};
  } else {
    throw stls::StructuralError("gen: unknown preset '" + preset + "'");
  }
  stls::io::write_json(dir / "problem.json", problem);
  stls::io::write_json(dir / "truth.json", truth);
  stls::io::write_vector_csv(dir / "x_true.csv", x_true, "x_true");
  return envelope("gen", json{{"preset", preset}, {"seed", c.seed}, {"averaging_blocks", blocks}}, elapsed(t0));
}

// ---------------------------------------------------------------------------
// run testcaseN

struct RunArgs {
  std::vector<double> eps = {1.0, 0.1, 0.01, 0.001};
  double mu = 5.0;
  double delta = 1e-4;
  int mc = 200;
  int roc_mc = 200;
  int n_lambda = 20;
  double lambda_min = 1e-3;
  double lambda_max = 3.0;
  int blocks = 100;
  double lambda = -1.0;  ///< negative: preset default
  double threshold = 1e-6;
};

json run_tc1(const RunArgs& a, const Common& c, const fs::path& dir) {
  stls::Tc1Options o;
  o.seed = c.seed;
  o.eps = a.eps;
  o.mu = a.mu;
  o.delta = a.delta;
  const auto r = stls::run_testcase1(o);
  stls::io::CsvTable t({"eps", "f_bisection", "f_alternating", "f_genie", "iterations", "iteration_bound", "bb_nodes"});
  json rows = json::array();
  for (const auto& row : r.rows) {
    t.add_row(std::vector<double>{row.eps, row.f_bisection, row.f_alternating, row.f_genie, double(row.iterations),
                                  double(row.iteration_bound), double(row.nodes)});
    rows.push_back(json{{"eps", row.eps}, {"f_bisection", row.f_bisection}, {"seconds", row.seconds}});
  }
  t.write(dir / "cost_vs_eps.csv");
  json out{{"report", stls::io::to_json(r.alternating.report)},
           {"alternating_lambda", r.alternating.lambda},
           {"bisection_x", stls::io::to_json(r.x_bisection)},
           {"per_eps", rows},
           {"metrics", stls::io::to_json(stls::eval_metrics(r.alternating.report.x_hat, r.instance.truth.x_true,
                                                             a.threshold))}};
  out["config"] = json{{"eps", a.eps}, {"mu", a.mu}, {"delta", a.delta}, {"seed", c.seed}};
  return out;
}

json run_tc2(const RunArgs& a, const Common& c, const fs::path& dir) {
  stls::Tc2Options o;
  o.seed = c.seed;
  o.mc = a.mc;
  o.roc_mc = a.roc_mc;
  o.n_lambda = a.n_lambda;
  o.lambda_lo = a.lambda_min;
  o.lambda_hi = a.lambda_max;
  o.support_threshold = a.threshold;
  o.threads = stls::threads_from_env();
  const auto r = stls::run_testcase2(o);

  stls::io::CsvTable t({"lambda", "lasso_l2", "lasso_l1", "lasso_l0_percent", "stls_l2", "stls_l1", "stls_l0_percent",
                        "l0_diff_mean_percent", "l0_diff_se_percent"});
  for (const auto& row : r.rows)
    t.add_row(std::vector<double>{row.lambda, row.lasso.l2_err, row.lasso.l1_err, row.lasso.l0_err_percent,
                                  row.stls.l2_err, row.stls.l1_err, row.stls.l0_err_percent, row.l0_diff_mean,
                                  row.l0_diff_se});
  t.write(dir / "errors_vs_lambda.csv");

  stls::io::CsvTable roc({"method", "threshold", "pfa", "pd"});
  json pd_ref = json::object();
  for (const auto& curve : r.roc) {
    for (std::size_t i = 0; i < curve.points.size(); ++i)
      roc.add_row({curve.method, stls::io::csv_number(curve.thresholds[i]), stls::io::csv_number(curve.points[i].pfa),
                   stls::io::csv_number(curve.points[i].pd)});
    pd_ref[curve.method] = curve.mean_pd_at_ref;
  }
  roc.write(dir / "roc.csv");

  json metrics = json::array();
  for (const auto& row : r.rows)
    metrics.push_back(json{{"lambda", row.lambda},
                           {"lasso", stls::io::to_json(row.lasso)},
                           {"stls", stls::io::to_json(row.stls)}});
  return json{{"metrics_by_lambda", metrics},
              {"pd_at_pfa", {{"pfa", r.roc_reference_pfa}, {"mean_pd", pd_ref}}},
              {"config",
               {{"mc", a.mc},
                {"roc_mc", a.roc_mc},
                {"n_lambda", a.n_lambda},
                {"lambda_min", a.lambda_min},
                {"lambda_max", a.lambda_max},
                {"threads", o.threads},
                {"seed", c.seed}}}};
}

json run_tc3(const RunArgs& a, const Common& c, const fs::path& dir) {
  stls::Tc3Options o;
  o.seed = c.seed;
  o.averaging_blocks = a.blocks;
  if (a.lambda >= 0) o.lambda = a.lambda;
  o.support_threshold = a.threshold;
  const auto r = stls::run_testcase3(o);
  const auto& sc = o.scenario;
  int band = sc.sources.empty() ? 0 : sc.sources.front().band;

  stls::io::CsvTable map({"x", "y", "band", "psd_lasso", "psd_wsstls", "psd_true"});
  for (std::size_t g = 0; g < sc.grid_points.size(); ++g) {
    const auto col = stls::cr_column(sc, static_cast<Eigen::Index>(g), band);
    map.add_row(std::vector<double>{sc.grid_points[g][0], sc.grid_points[g][1], double(band), r.lasso.x(col),
                                    r.wsstls.x(col), r.instance.truth.x_true(col)});
  }
  map.write(dir / "psd_map.csv");
  stls::io::CsvTable zoom({"x", "y", "correlation"});
  for (std::size_t i = 0; i < r.zoom_grid.size(); ++i)
    zoom.add_row(std::vector<double>{r.zoom_grid[i][0], r.zoom_grid[i][1], r.zoom_correlation[i]});
  zoom.write(dir / "zoom_correlation.csv");

  json out{{"report", stls::io::to_json(r.report)},
           {"metrics", stls::io::to_json(stls::eval_metrics(r.wsstls.x, r.instance.truth.x_true, a.threshold))},
           {"lasso_metrics", stls::io::to_json(stls::eval_metrics(r.lasso.x, r.instance.truth.x_true, a.threshold))},
           {"active_locations", {{"wsstls", r.wsstls.active_locations}, {"lasso", r.lasso.active_locations}}},
           {"energy_in_source_bands",
            {{"wsstls", r.wsstls.energy_in_source_bands}, {"lasso", r.lasso.energy_in_source_bands}}},
           {"refined_position", r.refined_position}};
  out["config"] = json{{"seed", c.seed}, {"averaging_blocks", a.blocks}, {"lambda", o.lambda}};
  return out;
}

json run_tc4(const RunArgs& a, const Common& c, const fs::path& dir) {
  stls::Tc4Options o;
  o.seed = c.seed;
  if (a.lambda >= 0) o.lambda = a.lambda;
  o.support_threshold = a.threshold;
  const auto r = stls::run_testcase4(o);
  const auto& sc = o.scenario;
  const auto& eps = r.report.eps().eps_a;

  stls::io::CsvTable t({"grid_angle_deg", "magnitude_lasso", "magnitude_wsstls", "corrected_angle_deg"});
  for (int g = 0; g < sc.n_grid; ++g)
    t.add_row(std::vector<double>{sc.grid_angle_deg(g), stls::complex_magnitude(r.x_lasso, g),
                                  stls::complex_magnitude(r.report.x_hat, g),
                                  sc.grid_angle_deg(g) + stls::rad2deg(eps(g))});
  t.write(dir / "angular_spectrum.csv");

  json out{{"report", stls::io::to_json(r.report)},
           {"metrics", stls::io::to_json(stls::eval_metrics(r.report.x_hat, r.instance.truth.x_true, a.threshold))},
           {"active_grid", {{"wsstls", r.active_wsstls}, {"lasso", r.active_lasso}}},
           {"corrected_angles_deg", r.corrected_deg},
           {"support_at_nearest", r.support_at_nearest}};
  if (r.support_at_nearest) out["max_angle_error_deg"] = r.max_angle_error_deg;
  out["config"] = json{{"seed", c.seed}, {"lambda", o.lambda}};
  return out;
}

json run_case(const std::string& which, const RunArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = prepare(c.out);
  json body;
  if (which == "testcase1") {
    body = run_tc1(a, c, dir);
  } else if (which == "testcase2") {
    body = run_tc2(a, c, dir);
  } else if (which == "testcase3") {
    body = run_tc3(a, c, dir);
  } else if (which == "testcase4") {
    body = run_tc4(a, c, dir);
  } else {
    throw stls::StructuralError("run: unknown test case '" + which + "'");
  }
  json config = body["config"];
  config["testcase"] = which;
  body.erase("config");
  json rep = envelope("run", std::move(config), elapsed(t0));
  rep.update(body);
  return rep;
}

// ---------------------------------------------------------------------------
// metrics

json run_metrics(const std::string& estimate, const std::string& truth, double threshold) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto xh = stls::io::load_vector_csv(estimate);
  const auto xt = stls::io::load_vector_csv(truth);
  json rep = envelope("metrics", json{{"estimate", estimate}, {"truth", truth}, {"threshold", threshold}}, 0.0);
  rep["metrics"] = stls::io::to_json(stls::eval_metrics(xh, xt, threshold));
  rep["wall_time_s"] = elapsed(t0);
  return rep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse total least-squares solvers and experiments"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  };

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Solve a problem file");
  solve->add_option("--problem", sa.problem, "Problem JSON")->required();
  solve->add_option("--solver", sa.solver, "Solver")
      ->check(CLI::IsMember({"lasso", "stls-alt", "stls-global", "wsstls", "matrix-stls"}))
      ->capture_default_str();
  solve->add_option("--lambda", sa.lambda, "Sparsity weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  solve->add_option("--mu", sa.mu, "l1 radius (stls-global)")->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--eps", sa.eps, "Bisection tolerance (stls-global)")->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--delta", sa.delta, "Branch-and-bound tolerance (stls-global)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  solve->add_option("--tol", sa.tol, "Relative cost decrease for stopping")->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--max-outer", sa.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--truth", sa.truth, "CSV with the true x, adds metrics");
  solve->add_option("--threshold", sa.threshold, "Support threshold")->check(CLI::NonNegativeNumber)->capture_default_str();
  add_common(solve);

  std::string preset;
  int gen_blocks = 100;
  auto* gen = app.add_subcommand("gen", "Generate a preset instance");
  gen->add_option("--preset", preset, "Preset")
      ->required()
      ->check(CLI::IsMember({"testcase1", "testcase2", "testcase3", "testcase4"}));
  gen->add_option("--blocks", gen_blocks, "Periodogram averaging blocks (testcase3)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_common(gen);

  RunArgs ra;
  std::string which;
  auto* run = app.add_subcommand("run", "Run a test case");
  run->add_option("testcase", which, "testcase1 | testcase2 | testcase3 | testcase4")
      ->required()
      ->check(CLI::IsMember({"testcase1", "testcase2", "testcase3", "testcase4"}));
  run->add_option("--eps", ra.eps, "Bisection tolerances (testcase1)")->capture_default_str();
  run->add_option("--mu", ra.mu, "l1 radius (testcase1)")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--delta", ra.delta, "Branch-and-bound tolerance (testcase1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--mc", ra.mc, "Monte-Carlo runs (testcase2)")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--roc-mc", ra.roc_mc, "Monte-Carlo runs for the ROC (testcase2)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--n-lambda", ra.n_lambda, "Grid size (testcase2)")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--lambda-min", ra.lambda_min, "Smallest lambda (testcase2)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--lambda-max", ra.lambda_max, "Largest lambda (testcase2)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--blocks", ra.blocks, "Periodogram averaging blocks (testcase3)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--lambda", ra.lambda, "Sparsity weight (testcase3, testcase4)")->check(CLI::NonNegativeNumber);
  run->add_option("--threshold", ra.threshold, "Support threshold")->check(CLI::NonNegativeNumber)->capture_default_str();
  add_common(run);

  std::string estimate, truth;
  double threshold = 1e-6;
  auto* metrics = app.add_subcommand("metrics", "Compare an estimate with the truth");
  metrics->add_option("--estimate", estimate, "CSV with the estimate")->required();
  metrics->add_option("--truth", truth, "CSV with the truth")->required();
  metrics->add_option("--threshold", threshold, "Support threshold")->check(CLI::NonNegativeNumber)->capture_default_str();
  metrics->add_option("--out", common.out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    json rep;
    if (*solve) {
      rep = run_solve(sa, common);
    } else if (*gen) {
      rep = run_gen(preset, gen_blocks, common);
    } else if (*run) {
      rep = run_case(which, ra, common);
    } else {
      rep = run_metrics(estimate, truth, threshold);
      std::cout << rep["metrics"].dump(2) << '\n';
      if (metrics->count("--out") == 0) return 0;
    }
    stls::io::write_json(prepare(common.out) / "report.json", rep);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "stls: " << e.what() << '\n';
    return 1;
  }
}
