#include "stls/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace stls {

int threads_from_env() {
  const char* v = std::getenv("STLS_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  require(end != v && *end == '\0' && n >= 0, "STLS_THREADS must be a nonnegative integer");
  return static_cast<int>(std::min<long>(n, 256));
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min(threads, count);
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// test case 1

AltAtL1 alternating_at_l1_radius(const ProblemInstance<double>& prob, double mu, const AltConfig& cfg) {
  require(mu > 0.0, "alternating_at_l1_radius: mu must be positive");
  auto solve = [&](double lambda) { return solve_stls_alternating(prob, RegularizationSpec(lambda), cfg); };
  // x = 0 for every lambda above 2 ||A'y||_inf
  double hi = 2.0 * (prob.A().transpose() * prob.y()).cwiseAbs().maxCoeff() + 1e-12;
  double lo = hi * 1e-8;
  AltAtL1 best{solve(lo), lo};
  if (best.report.x_hat.lpNorm<1>() <= mu) return best;
  for (int it = 0; it < 80; ++it) {
    const double mid = std::sqrt(lo * hi);
    auto rep = solve(mid);
    const double l1 = rep.x_hat.lpNorm<1>();
    if (l1 > mu) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(l1 - mu) < std::abs(best.report.x_hat.lpNorm<1>() - mu)) best = AltAtL1{std::move(rep), mid};
    if (std::abs(l1 - mu) <= 1e-9 * mu || hi / lo < 1.0 + 1e-12) break;
  }
  return best;
}

double genie_fractional_cost(const ProblemInstance<double>& prob, std::array<Eigen::Index, 2> support, double mu) {
  require(mu > 0.0, "genie: mu must be positive");
  require(support[0] != support[1] && support[0] >= 0 && support[1] >= 0 && support[0] < prob.n() &&
              support[1] < prob.n(),
          "genie: support must name two distinct columns");
  // t in [0, 4) walks the four edges of |x1| + |x2| = mu
  auto point = [&](double t) {
    const double s = t - std::floor(t);
    const int edge = static_cast<int>(std::floor(t)) & 3;
    const double u = mu * (1.0 - s), v = mu * s;
    std::array<double, 2> p{};
    switch (edge) {
      case 0: p = {u, v}; break;
      case 1: p = {-v, u}; break;
      case 2: p = {-u, -v}; break;
      default: p = {v, -u}; break;
    }
    VectorXd x = VectorXd::Zero(prob.n());
    x(support[0]) = p[0];
    x(support[1]) = p[1];
    return x;
  };
  auto f = [&](double t) { return fractional_cost(prob, point(t)); };
  const int samples = 40000;
  const double h = 4.0 / samples;
  double best_t = 0, best = f(0.0);
  for (int i = 1; i < samples; ++i) {
    const double v = f(i * h);
    if (v < best) {
      best = v;
      best_t = i * h;
    }
  }
  // golden section inside the bracketing cell; f is smooth along an edge
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = best_t - h, b = best_t + h;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return std::min({best, fc, fd});
}

Tc1Result run_testcase1(const Tc1Options& opt) {
  require(!opt.eps.empty(), "testcase1: need at least one eps");
  Tc1Result out{gen_random_eiv(EivSpec::testcase1(), opt.seed), {}, {}, {}};
  const auto& prob = out.instance.problem;
  out.alternating = alternating_at_l1_radius(prob, opt.mu);
  const double f_alt = fractional_cost(prob, out.alternating.report.x_hat);

  std::array<Eigen::Index, 2> support{-1, -1};
  int found = 0;
  for (Eigen::Index i = 0; i < prob.n() && found < 2; ++i)
    if (out.instance.truth.x_true(i) != 0.0) support[static_cast<std::size_t>(found++)] = i;
  const double f_genie =
      found == 2 ? genie_fractional_cost(prob, support, opt.mu) : std::numeric_limits<double>::quiet_NaN();

  for (double eps : opt.eps) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto bis = bisection_solve<double>(prob, opt.mu, eps, opt.delta, opt.bb);
    long nodes = 0;
    for (const auto& h : bis.history) nodes += h.nodes;
    out.rows.push_back(Tc1Row{eps, bis.f_star, f_alt, f_genie, bis.iterations, bis.iteration_bound, nodes,
                              seconds_since(t0)});
    out.x_bisection = bis.x_star;
  }
  return out;
}

// ---------------------------------------------------------------------------
// test case 2

Tc2Options::Tc2Options() {
  roc_spec = spec;
  roc_spec.m = 40;
  roc_spec.n = 40;
  roc_spec.col_var = 1.0 / 40.0;
  roc_spec.pert_var = spec.pert_var * spec.m / 40.0;
}

double pd_at_pfa(std::vector<RocPoint> points, double pfa) {
  points.push_back({0.0, 0.0});
  points.push_back({1.0, 1.0});
  std::sort(points.begin(), points.end(),
            [](const RocPoint& a, const RocPoint& b) { return a.pfa < b.pfa || (a.pfa == b.pfa && a.pd < b.pd); });
  // upper envelope in pd so the curve is nondecreasing
  for (std::size_t i = 1; i < points.size(); ++i) points[i].pd = std::max(points[i].pd, points[i - 1].pd);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& a = points[i - 1];
    const auto& b = points[i];
    if (pfa > b.pfa) continue;
    if (b.pfa == a.pfa) return b.pd;
    return a.pd + (b.pd - a.pd) * (pfa - a.pfa) / (b.pfa - a.pfa);
  }
  return 1.0;
}

std::vector<RocPoint> roc_points(const VectorXd& x_hat, const VectorXd& x_true, const std::vector<double>& thresholds) {
  require(x_hat.size() == x_true.size(), "roc_points: length mismatch");
  std::vector<RocPoint> pts;
  pts.reserve(thresholds.size());
  for (double t : thresholds) {
    Eigen::Index nz = 0, z = 0, hit = 0, fa = 0;
    for (Eigen::Index i = 0; i < x_hat.size(); ++i) {
      const bool est = std::abs(x_hat(i)) > t;
      if (x_true(i) != 0.0) {
        ++nz;
        hit += est;
      } else {
        ++z;
        fa += est;
      }
    }
    pts.push_back({z ? double(fa) / double(z) : 0.0, nz ? double(hit) / double(nz) : 1.0});
  }
  return pts;
}

Tc2Result run_testcase2(const Tc2Options& opt) {
  require(opt.mc >= 2 && opt.roc_mc >= 1, "testcase2: need at least two Monte-Carlo runs");
  require(opt.n_lambda >= 3, "testcase2: need at least three lambda values");
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = log_grid(opt.lambda_lo, opt.lambda_hi, opt.n_lambda);
  const auto L = grid.size();

  // per run, per lambda: lasso and stls metrics
  std::vector<std::vector<Metrics>> lasso(static_cast<std::size_t>(opt.mc)), stls(static_cast<std::size_t>(opt.mc));
  parallel_for(opt.mc, opt.threads, [&](int r) {
    const auto inst = gen_random_eiv(opt.spec, opt.seed + static_cast<std::uint64_t>(r));
    const auto& prob = inst.problem;
    auto& lr = lasso[static_cast<std::size_t>(r)];
    auto& sr = stls[static_cast<std::size_t>(r)];
    for (double lambda : grid) {
      const VectorXd xl = lasso_cd<double>(prob.y(), prob.A(), lambda, VectorXd::Zero(prob.n()), opt.alt.inner).x;
      const VectorXd xs = solve_stls_alternating(prob, RegularizationSpec(lambda), opt.alt).x_hat;
      lr.push_back(eval_metrics(xl, inst.truth.x_true, opt.support_threshold));
      sr.push_back(eval_metrics(xs, inst.truth.x_true, opt.support_threshold));
    }
  });

  Tc2Result out;
  const double N = opt.mc;
  for (std::size_t k = 0; k < L; ++k) {
    Tc2LambdaRow row;
    row.lambda = grid[k];
    double d_sum = 0, d_sq = 0;
    for (int r = 0; r < opt.mc; ++r) {
      const auto& a = lasso[static_cast<std::size_t>(r)][k];
      const auto& b = stls[static_cast<std::size_t>(r)][k];
      row.lasso.l2_err += a.l2_err / N;
      row.lasso.l1_err += a.l1_err / N;
      row.lasso.l0_err_percent += a.l0_err_percent / N;
      row.lasso.pd += a.pd / N;
      row.lasso.pfa += a.pfa / N;
      row.stls.l2_err += b.l2_err / N;
      row.stls.l1_err += b.l1_err / N;
      row.stls.l0_err_percent += b.l0_err_percent / N;
      row.stls.pd += b.pd / N;
      row.stls.pfa += b.pfa / N;
      const double d = b.l0_err_percent - a.l0_err_percent;
      d_sum += d;
      d_sq += d * d;
    }
    row.l0_diff_mean = d_sum / N;
    const double var = std::max(0.0, (d_sq - N * row.l0_diff_mean * row.l0_diff_mean) / (N - 1.0));
    row.l0_diff_se = std::sqrt(var / N);
    out.rows.push_back(row);
  }

  // ROC on square instances: CV-selected lambda for the sparse estimators
  std::vector<double> thresholds{0.0};
  for (double t : log_grid(1e-6, 1e2, 400)) thresholds.push_back(t);
  const std::vector<std::string> methods{"stls", "lasso", "tls"};
  std::vector<std::vector<std::vector<RocPoint>>> per_run(methods.size(),
                                                          std::vector<std::vector<RocPoint>>(opt.roc_mc));
  const std::uint64_t roc_seed = opt.seed + 1'000'003ULL;
  parallel_for(opt.roc_mc, opt.threads, [&](int r) {
    const auto inst = gen_random_eiv(opt.roc_spec, roc_seed + static_cast<std::uint64_t>(r));
    const auto& prob = inst.problem;
    const auto cv_seed = roc_seed + static_cast<std::uint64_t>(r);
    const double ls = select_lambda_cv(prob, grid, opt.cv_folds, SolverKind::stls_alt, cv_seed, opt.alt);
    const double ll = select_lambda_cv(prob, grid, opt.cv_folds, SolverKind::lasso, cv_seed, opt.alt);
    const VectorXd xs = solve_stls_alternating(prob, RegularizationSpec(ls), opt.alt).x_hat;
    const VectorXd xl = lasso_cd<double>(prob.y(), prob.A(), ll, VectorXd::Zero(prob.n()), opt.alt.inner).x;
    const VectorXd xt = tls_estimate(prob);
    const auto i = static_cast<std::size_t>(r);
    per_run[0][i] = roc_points(xs, inst.truth.x_true, thresholds);
    per_run[1][i] = roc_points(xl, inst.truth.x_true, thresholds);
    per_run[2][i] = roc_points(xt, inst.truth.x_true, thresholds);
  });
  for (std::size_t m = 0; m < methods.size(); ++m) {
    RocCurve c;
    c.method = methods[m];
    c.thresholds = thresholds;
    c.points.assign(thresholds.size(), RocPoint{});
    for (const auto& run : per_run[m]) {
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        c.points[t].pfa += run[t].pfa / opt.roc_mc;
        c.points[t].pd += run[t].pd / opt.roc_mc;
      }
      c.pd_at_ref.push_back(pd_at_pfa(run, out.roc_reference_pfa));
    }
    c.mean_pd_at_ref = std::accumulate(c.pd_at_ref.begin(), c.pd_at_ref.end(), 0.0) / opt.roc_mc;
    out.roc.push_back(std::move(c));
  }
  out.runtime_seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// test case 3

std::array<double, 2> cr_zoom_refine(const CrScenario& sc, const VectorXd& gains, std::array<double, 2> centre,
                                     std::vector<std::array<double, 2>>* grid, std::vector<double>* correlation) {
  const auto Nr = static_cast<Eigen::Index>(sc.receivers.size());
  require(gains.size() == Nr, "cr_zoom_refine: one gain per receiver is required");
  auto centred = [](VectorXd v) {
    v.array() -= v.mean();
    return v;
  };
  const VectorXd g0 = centred(gains);
  std::array<double, 2> best_p = centre;
  double best = -std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < 5; ++iy)
    for (int ix = 0; ix < 5; ++ix) {
      const std::array<double, 2> p{centre[0] - 0.2 + 0.1 * ix, centre[1] - 0.2 + 0.1 * iy};
      VectorXd c(Nr);
      bool ok = true;
      for (Eigen::Index r = 0; r < Nr; ++r) {
        const auto& rx = sc.receivers[static_cast<std::size_t>(r)];
        if (std::hypot(p[0] - rx[0], p[1] - rx[1]) < 1e-12) {
          ok = false;
          break;
        }
        c(r) = cr_gain(p, rx, sc.pathloss_exponent);
      }
      double rho = -std::numeric_limits<double>::infinity();
      if (ok) {
        const VectorXd cc = centred(c);
        const double den = cc.norm() * g0.norm();
        rho = den > 0.0 ? cc.dot(g0) / den : 0.0;
      }
      if (grid) grid->push_back(p);
      if (correlation) correlation->push_back(rho);
      if (rho > best) {
        best = rho;
        best_p = p;
      }
    }
  return best_p;
}

namespace {

Tc3Estimate summarize_cr(const CrScenario& sc, const VectorXd& x, double thr) {
  std::set<int> source_bands;
  for (const auto& s : sc.sources) source_bands.insert(s.band);
  Tc3Estimate e{x, {}, true};
  bool any = false;
  for (std::size_t g = 0; g < sc.grid_points.size(); ++g) {
    bool active = false;
    for (int nu = 0; nu < sc.n_bands; ++nu) {
      if (std::abs(x(cr_column(sc, static_cast<Eigen::Index>(g), nu))) <= thr) continue;
      active = any = true;
      if (!source_bands.count(nu)) e.energy_in_source_bands = false;
    }
    if (active) e.active_locations.push_back(static_cast<int>(g));
  }
  e.energy_in_source_bands = e.energy_in_source_bands && any;
  return e;
}

}  // namespace

Tc3Result run_testcase3(const Tc3Options& opt) {
  auto inst = gen_cr_scenario(opt.scenario, opt.averaging_blocks, opt.seed);
  const auto& sc = opt.scenario;
  const WsstlsContext<double> ctx(inst.problem, inst.structure, inst.weight);
  const RegularizationSpec reg(opt.lambda);
  auto rep = solve_wsstls(ctx, reg, opt.wsstls);
  const VectorXd x_lasso =
      wsstls_x_update<double>(ctx, VectorXd::Zero(inst.structure.n_a()), reg, VectorXd::Zero(inst.problem.n()),
                              opt.wsstls.inner)
          .x;
  Tc3Result out{std::move(inst), {}, summarize_cr(sc, rep.x_hat, opt.support_threshold),
                summarize_cr(sc, x_lasso, opt.support_threshold), {}, {}, {}};

  // strongest active location, then corrected gains gamma_gr + eps_gr
  int g_best = -1;
  double p_best = -1;
  for (int g : out.wsstls.active_locations) {
    double p = 0;
    for (int nu = 0; nu < sc.n_bands; ++nu) p += std::abs(rep.x_hat(cr_column(sc, g, nu)));
    if (p > p_best) {
      p_best = p;
      g_best = g;
    }
  }
  if (g_best >= 0) {
    const auto Nr = static_cast<Eigen::Index>(sc.receivers.size());
    VectorXd gains(Nr);
    for (Eigen::Index r = 0; r < Nr; ++r)
      gains(r) = cr_gain(sc.grid_points[static_cast<std::size_t>(g_best)], sc.receivers[static_cast<std::size_t>(r)],
                         sc.pathloss_exponent) +
                 rep.eps().eps_a(cr_atom(sc, g_best, r));
    out.refined_position = cr_zoom_refine(sc, gains, sc.grid_points[static_cast<std::size_t>(g_best)],
                                          &out.zoom_grid, &out.zoom_correlation);
  }
  out.report = std::move(rep);
  return out;
}

// ---------------------------------------------------------------------------
// test case 4

Tc4Result run_testcase4(const Tc4Options& opt) {
  auto inst = gen_doa_scenario(opt.scenario, opt.seed);
  const auto& sc = opt.scenario;
  const WsstlsContext<double> ctx(inst.problem, inst.structure, inst.weight);
  const RegularizationSpec reg(opt.lambda, inst.groups);
  auto rep = solve_wsstls(ctx, reg, opt.wsstls);
  VectorXd x_lasso = wsstls_x_update<double>(ctx, VectorXd::Zero(inst.structure.n_a()), reg,
                                             VectorXd::Zero(inst.problem.n()), opt.wsstls.inner)
                         .x;

  Tc4Result out{std::move(inst), {}, std::move(x_lasso), {}, {}, {}, false,
                std::numeric_limits<double>::infinity()};
  for (int g = 0; g < sc.n_grid; ++g) {
    if (complex_magnitude(rep.x_hat, g) > opt.support_threshold) {
      out.active_wsstls.push_back(g);
      out.corrected_deg.push_back(sc.grid_angle_deg(g) + rad2deg(rep.eps().eps_a(g)));
    }
    if (complex_magnitude(out.x_lasso, g) > opt.support_threshold) out.active_lasso.push_back(g);
  }

  // one active point per source, each at one of that source's nearest angles
  const auto& truth = out.instance.truth;
  if (out.active_wsstls.size() == truth.nearest_grid.size()) {
    std::vector<bool> used(out.active_wsstls.size(), false);
    double worst = 0;
    bool ok = true;
    for (std::size_t s = 0; s < truth.nearest_grid.size() && ok; ++s) {
      ok = false;
      for (std::size_t k = 0; k < out.active_wsstls.size(); ++k) {
        const auto& near = truth.nearest_grid[s];
        if (used[k] || std::find(near.begin(), near.end(), out.active_wsstls[k]) == near.end()) continue;
        used[k] = true;
        ok = true;
        worst = std::max(worst, std::abs(out.corrected_deg[k] - truth.angles_deg[s]));
        break;
      }
    }
    out.support_at_nearest = ok;
    if (ok) out.max_angle_error_deg = worst;
  }
  out.report = std::move(rep);
  return out;
}

}  // namespace stls
