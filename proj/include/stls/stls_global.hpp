#pragma once

#include <queue>

#include "stls/stls_alt.hpp"

namespace stls {

struct L1Ball {
  double mu;
  explicit L1Ball(double radius) : mu(radius) { require(radius > 0.0, "l1 ball: mu must be positive"); }
};

template <typename Scalar>
struct Box {
  Vec<Scalar> lower;
  Vec<Scalar> upper;

  Box(Vec<Scalar> lo, Vec<Scalar> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require(lower.size() == upper.size(), "box: bound lengths differ");
    require((lower.array() <= upper.array()).all(), "box: lower must not exceed upper");
  }
  static Box cube(Eigen::Index n, Scalar half_width) {
    return Box(Vec<Scalar>::Constant(n, -half_width), Vec<Scalar>::Constant(n, half_width));
  }
  Eigen::Index size() const { return lower.size(); }
  Vec<Scalar> center() const { return (lower + upper) / Scalar(2); }
  bool contains(const Vec<Scalar>& x, Scalar slack = 0) const {
    return ((x.array() >= lower.array() - slack) && (x.array() <= upper.array() + slack)).all();
  }
};

/// Box with the lower-bound tag used for best-first selection.
template <typename Scalar>
struct BoxTriplet {
  Box<Scalar> box;
  Scalar tag;
};

/// ||y - Ax||^2 - a (1 + ||x||^2)
template <typename Scalar>
Scalar g_value(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x, Scalar a) {
  return (prob.y() - prob.A() * x).squaredNorm() - a * (Scalar(1) + x.squaredNorm());
}

/// Euclidean projection onto {||x||_1 <= mu} intersected with a box.
///
/// The projection is clamp(soft(v, tau), lower, upper) for the smallest
/// tau >= 0 meeting the l1 budget; the budget is piecewise linear in tau, so
/// tau is located exactly among the breakpoints.
template <typename Scalar>
Vec<Scalar> project_l1_box(const Vec<Scalar>& v, Scalar mu, const Box<Scalar>& box) {
  const Eigen::Index n = v.size();
  require(box.size() == n, "project_l1_box: dimension mismatch");
  require(mu >= Scalar(0), "project_l1_box: mu must be nonnegative");
  auto at = [&](Scalar tau, Vec<Scalar>& out) {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar shrunk = std::abs(v(i)) > tau ? v(i) - sign(v(i)) * tau : Scalar(0);
      out(i) = std::clamp(shrunk, box.lower(i), box.upper(i));
      s += std::abs(out(i));
    }
    return s;
  };
  Vec<Scalar> x(n);
  const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), mu);
  Scalar base = 0;
  for (Eigen::Index i = 0; i < n; ++i) base += std::abs(std::clamp(Scalar(0), box.lower(i), box.upper(i)));
  require(base <= mu + slack, "project_l1_box: box and l1 ball do not intersect");
  if (at(Scalar(0), x) <= mu) return x;

  std::vector<Scalar> knots{Scalar(0)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar av = std::abs(v(i));
    knots.push_back(av);
    for (Scalar bound : {box.lower(i), box.upper(i)}) {
      const Scalar t = av - std::abs(bound);
      if (t > Scalar(0)) knots.push_back(t);
    }
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  Scalar lo = 0, s_lo = at(Scalar(0), x);
  for (Scalar t : knots) {
    if (t <= lo) continue;
    const Scalar s_t = at(t, x);
    if (s_t <= mu) {
      // budget is linear on [lo, t]
      const Scalar tau = s_lo == s_t ? t : lo + (s_lo - mu) * (t - lo) / (s_lo - s_t);
      if (at(std::min(tau, t), x) > mu + slack) at(t, x);
      return x;
    }
    lo = t;
    s_lo = s_t;
  }
  at(knots.back(), x);
  return x;
}

template <typename Scalar>
Vec<Scalar> project_l1_box(const Vec<Scalar>& v, const L1Ball& ball, const Box<Scalar>& box) {
  return project_l1_box<Scalar>(v, static_cast<Scalar>(ball.mu), box);
}

namespace detail {

/// Cached quantities of g(., a) for a fixed problem.
template <typename Scalar>
struct QuadraticModel {
  const ProblemInstance<Scalar>* prob;
  Mat<Scalar> AtA;
  Vec<Scalar> Aty;
  Scalar eig_min = 0;
  Scalar eig_max = 0;

  explicit QuadraticModel(const ProblemInstance<Scalar>& p) : prob(&p) {
    AtA = p.A().transpose() * p.A();
    Aty = p.A().transpose() * p.y();
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(AtA, Eigen::EigenvaluesOnly);
    eig_min = es.eigenvalues()(0);
    eig_max = es.eigenvalues()(es.eigenvalues().size() - 1);
  }
  Scalar g(const Vec<Scalar>& x, Scalar a) const { return g_value(*prob, x, a); }
  Vec<Scalar> grad(const Vec<Scalar>& x, Scalar a) const {
    return Scalar(2) * (AtA * x - Aty) - Scalar(2) * a * x;
  }
};

}  // namespace detail

/// Convex underestimator gL(x) = g(x, a) + (x - xL)' D (x - xU) on a box,
/// with the uniform shift D = max(0, -lambda_min(H)/2) I, H = 2(A'A - aI).
template <typename Scalar>
struct Underestimator {
  Vec<Scalar> D;  ///< diagonal of D
  Box<Scalar> box;
  Scalar a;

  Scalar value(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x) const {
    return g_value(prob, x, a) + ((x - box.lower).array() * D.array() * (x - box.upper).array()).sum();
  }
};

template <typename Scalar>
Scalar uniform_shift(Scalar eig_min_AtA, Scalar a) {
  return std::max(Scalar(0), a - eig_min_AtA);
}

template <typename Scalar>
Underestimator<Scalar> underestimator(const ProblemInstance<Scalar>& prob, Scalar a, const Box<Scalar>& box) {
  require(box.size() == prob.n(), "underestimator: box dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(prob.A().transpose() * prob.A(), Eigen::EigenvaluesOnly);
  const Scalar d = uniform_shift(es.eigenvalues()(0), a);
  return Underestimator<Scalar>{Vec<Scalar>::Constant(prob.n(), d), box, a};
}

struct BbConfig {
  int local_max_steps = 500;   ///< projected-gradient steps for the upper bound
  int lower_max_steps = 400;   ///< accelerated projected-gradient steps for the lower bound
  double armijo_sigma = 1e-4;
  long max_nodes = 5'000'000;
};

template <typename Scalar>
struct BbResult {
  Vec<Scalar> x;
  Scalar upper = std::numeric_limits<Scalar>::infinity();
  Scalar lower_bound = -std::numeric_limits<Scalar>::infinity();
  long nodes = 0;
  bool converged = false;
};

namespace detail {

/// min c'z over box intersected with {||z||_1 <= mu}: a fractional knapsack.
template <typename Scalar>
Scalar linear_min_l1_box(const Vec<Scalar>& c, Scalar mu, const Box<Scalar>& box) {
  const Eigen::Index n = c.size();
  Scalar val = 0, budget = mu;
  std::vector<std::pair<Scalar, Scalar>> moves;  // (gain per unit, capacity)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar base = std::clamp(Scalar(0), box.lower(i), box.upper(i));
    budget -= std::abs(base);
    val += c(i) * base;
    const Scalar cap = c(i) < Scalar(0) ? box.upper(i) - base : (c(i) > Scalar(0) ? base - box.lower(i) : Scalar(0));
    if (cap > Scalar(0)) moves.emplace_back(std::abs(c(i)), cap);
  }
  std::sort(moves.begin(), moves.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
  for (const auto& [gain, cap] : moves) {
    if (budget <= Scalar(0)) break;
    const Scalar t = std::min(cap, budget);
    val -= gain * t;
    budget -= t;
  }
  return val;
}

/// Projected gradient with Armijo backtracking along the projection arc.
template <typename Scalar, typename F, typename G, typename P>
Vec<Scalar> projected_gradient(F&& value, G&& grad, P&& project, Vec<Scalar> x, Scalar step0, int max_steps,
                               Scalar sigma) {
  Scalar fx = value(x);
  for (int k = 0; k < max_steps; ++k) {
    const Vec<Scalar> gx = grad(x);
    Scalar s = step0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vec<Scalar> xn = project(Vec<Scalar>(x - s * gx));
      const Scalar fn = value(xn);
      if (fn <= fx + sigma * gx.dot(xn - x)) {
        const Scalar change = (xn - x).cwiseAbs().maxCoeff();
        moved = change > Scalar(1e-12) * std::max(Scalar(1), x.cwiseAbs().maxCoeff());
        x = std::move(xn);
        fx = fn;
        break;
      }
      s /= Scalar(2);
    }
    if (!moved) break;
  }
  return x;
}

template <typename Scalar>
struct LowerBoundResult {
  Vec<Scalar> x;
  Scalar bound;
};

/// Minimizes the convex underestimator over box intersected with the l1 ball
/// by accelerated projected gradient, and certifies a lower bound through the
/// linearization at the final point. Stops early once the bound reaches
/// prune_level, or once an iterate falls below prune_level (the box is then
/// split regardless of how tight the bound is).
template <typename Scalar>
LowerBoundResult<Scalar> lower_bound_on_box(const QuadraticModel<Scalar>& qm, Scalar a, Scalar d, Scalar mu,
                                            const Box<Scalar>& box, const Vec<Scalar>& start, Scalar target_gap,
                                            int max_steps,
                                            Scalar prune_level = std::numeric_limits<Scalar>::infinity()) {
  const auto& prob = *qm.prob;
  auto value = [&](const Vec<Scalar>& x) {
    return qm.g(x, a) + d * ((x - box.lower).array() * (x - box.upper).array()).sum();
  };
  auto grad = [&](const Vec<Scalar>& x) {
    return Vec<Scalar>(qm.grad(x, a) + d * (Scalar(2) * x - box.lower - box.upper));
  };
  auto certificate = [&](const Vec<Scalar>& x, const Vec<Scalar>& gx, Scalar fx) {
    return fx + linear_min_l1_box<Scalar>(gx, mu, box) - gx.dot(x);
  };
  const Scalar lip = Scalar(2) * (qm.eig_max - a + d);
  Vec<Scalar> x = project_l1_box<Scalar>(start, mu, box);
  Vec<Scalar> gx = grad(x);
  Scalar fx = value(x);
  Scalar best_bound = certificate(x, gx, fx);
  if (!(lip > Scalar(0))) return {x, best_bound};
  const Scalar step = Scalar(1) / lip;
  Vec<Scalar> yk = x;
  Scalar t = 1;
  Vec<Scalar> best_x = x;
  Scalar best_f = fx;
  for (int k = 1; k <= max_steps; ++k) {
    const Vec<Scalar> gy = grad(yk);
    Vec<Scalar> xn = project_l1_box<Scalar>(Vec<Scalar>(yk - step * gy), mu, box);
    const Scalar fn = value(xn);
    if (fn > fx) {  // restart momentum
      t = 1;
      yk = x;
      continue;
    }
    const Scalar tn = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
    yk = xn + ((t - Scalar(1)) / tn) * (xn - x);
    t = tn;
    x = std::move(xn);
    fx = fn;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    if (k % 10 == 0 || k == max_steps) {
      gx = grad(x);
      best_bound = std::max(best_bound, certificate(x, gx, fx));
      if (best_f - best_bound <= target_gap || best_bound >= prune_level || best_f < prune_level) break;
    }
  }
  (void)prob;
  return {best_x, best_bound};
}

/// Shrinks a box using the l1 budget; returns false when the box misses the ball.
template <typename Scalar>
bool tighten_box(Box<Scalar>& box, Scalar mu) {
  const Eigen::Index n = box.size();
  Vec<Scalar> minabs(n);
  for (Eigen::Index i = 0; i < n; ++i) minabs(i) = std::abs(std::clamp(Scalar(0), box.lower(i), box.upper(i)));
  const Scalar used = minabs.sum();
  if (used > mu * (Scalar(1) + Scalar(1e-14))) return false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar room = mu - (used - minabs(i));
    box.upper(i) = std::min(box.upper(i), room);
    box.lower(i) = std::max(box.lower(i), -room);
    if (box.lower(i) > box.upper(i)) return false;
  }
  return true;
}

template <typename Scalar>
BbResult<Scalar> bb_solve(const QuadraticModel<Scalar>& qm, Scalar a, Scalar mu, Scalar delta, const BbConfig& cfg) {
  const Eigen::Index n = qm.prob->n();
  const Scalar d = uniform_shift(qm.eig_min, a);
  const Scalar lip_g = Scalar(2) * std::max(std::abs(qm.eig_max - a), std::abs(qm.eig_min - a));
  const Scalar step_g = lip_g > Scalar(0) ? Scalar(2) / lip_g : Scalar(1);

  struct Node {
    Box<Scalar> box;
    Scalar tag;
    long order;
  };
  auto cmp = [](const Node& l, const Node& r) { return l.tag > r.tag || (l.tag == r.tag && l.order > r.order); };
  std::priority_queue<Node, std::vector<Node>, decltype(cmp)> open(cmp);
  long counter = 0;
  open.push(Node{Box<Scalar>::cube(n, mu), -std::numeric_limits<Scalar>::infinity(), counter++});

  BbResult<Scalar> res;
  res.x = Vec<Scalar>::Zero(n);
  Scalar closed_min = std::numeric_limits<Scalar>::infinity();  // min lower bound over discarded boxes

  auto project_into = [&](const Box<Scalar>& b) {
    return [&b, mu](const Vec<Scalar>& v) { return project_l1_box<Scalar>(v, mu, b); };
  };

  while (!open.empty()) {
    if (res.nodes >= cfg.max_nodes) break;
    Node node = open.top();
    open.pop();
    if (node.tag >= res.upper - delta) {
      closed_min = std::min(closed_min, node.tag);
      while (!open.empty()) {
        closed_min = std::min(closed_min, open.top().tag);
        open.pop();
      }
      break;
    }
    ++res.nodes;
    Box<Scalar> box = node.box;
    if (!tighten_box(box, mu)) continue;

    // upper bound: local descent from the box center
    const Vec<Scalar> x0 = project_l1_box<Scalar>(box.center(), mu, box);
    const Vec<Scalar> xl = projected_gradient<Scalar>([&](const Vec<Scalar>& x) { return qm.g(x, a); },
                                                      [&](const Vec<Scalar>& x) { return qm.grad(x, a); },
                                                      project_into(box), x0, step_g, cfg.local_max_steps,
                                                      static_cast<Scalar>(cfg.armijo_sigma));
    const Scalar gl = qm.g(xl, a);
    if (gl < res.upper) {
      res.upper = gl;
      res.x = xl;
    }

    // lower bound: certified minimum of the convex underestimator
    const auto lb = lower_bound_on_box<Scalar>(qm, a, d, mu, box, xl, delta / Scalar(10), cfg.lower_max_steps,
                                               res.upper - delta);
    const Scalar glb = qm.g(lb.x, a);
    if (glb < res.upper) {
      res.upper = glb;
      res.x = lb.x;
    }
    const Scalar L = std::max(node.tag, lb.bound);

    if (res.upper - L > delta) {
      Eigen::Index i = 0;
      (box.upper - box.lower).maxCoeff(&i);  // lowest index among maximal edges
      const Scalar mid = (box.lower(i) + box.upper(i)) / Scalar(2);
      Box<Scalar> left = box, right = box;
      left.upper(i) = mid;
      right.lower(i) = mid;
      open.push(Node{std::move(left), L, counter++});
      open.push(Node{std::move(right), L, counter++});
    } else {
      closed_min = std::min(closed_min, L);
    }
  }
  res.converged = open.empty();
  Scalar lb = closed_min;
  while (!open.empty()) {
    lb = std::min(lb, open.top().tag);
    open.pop();
  }
  res.lower_bound = std::min(lb, res.upper);
  return res;
}

}  // namespace detail

/// delta-optimal global minimizer of g(., a) over the l1 ball of radius mu.
template <typename Scalar>
BbResult<Scalar> bb_solve(const ProblemInstance<Scalar>& prob, Scalar a, Scalar mu, Scalar delta,
                          const BbConfig& cfg = {}) {
  require(mu > Scalar(0) && delta > Scalar(0), "bb_solve: mu and delta must be positive");
  const detail::QuadraticModel<Scalar> qm(prob);
  return detail::bb_solve<Scalar>(qm, a, mu, delta, cfg);
}

template <typename Scalar>
struct BisectionStep {
  Scalar a;
  Scalar g;   ///< g(x_g, a) of the branch-and-bound output
  Scalar f;   ///< f(x_g)
  Scalar lower;
  Scalar upper;
  long nodes;
};

template <typename Scalar>
struct BisectionResult {
  Vec<Scalar> x_star;
  Scalar f_star = 0;
  Scalar lower = 0;
  Scalar upper = 0;
  Scalar u0 = 0;
  int iterations = 0;
  int iteration_bound = 0;
  bool bb_converged = true;
  std::vector<BisectionStep<Scalar>> history;
};

/// ceil(ln(u0 / (eps - 2 delta)) / ln 2), clamped at zero.
inline int bisection_iteration_bound(double u0, double eps, double delta) {
  require(eps > 2.0 * delta, "bisection: delta must be below eps/2");
  if (u0 <= 0.0) return 0;
  const double v = std::ceil(std::log(u0 / (eps - 2.0 * delta)) / std::log(2.0));
  return v > 0.0 ? static_cast<int>(v) : 0;
}

/// eps-optimal minimizer of ||y - Ax||^2 / (1 + ||x||^2) over ||x||_1 <= mu.
template <typename Scalar>
BisectionResult<Scalar> bisection_solve(const ProblemInstance<Scalar>& prob, Scalar mu, Scalar eps, Scalar delta,
                                        const BbConfig& cfg = {}) {
  require(mu > Scalar(0), "bisection: mu must be positive");
  require(delta > Scalar(0) && delta < eps / Scalar(2), "bisection: need 0 < delta < eps/2");
  const detail::QuadraticModel<Scalar> qm(prob);

  BisectionResult<Scalar> out;
  Scalar l = 0, u = prob.y().squaredNorm();
  out.u0 = u;
  out.iteration_bound = bisection_iteration_bound(static_cast<double>(u), static_cast<double>(eps),
                                                  static_cast<double>(delta));
  out.x_star = Vec<Scalar>::Zero(prob.n());
  out.f_star = u;
  while (u - l > eps) {
    const Scalar a = (l + u) / Scalar(2);
    const auto bb = detail::bb_solve<Scalar>(qm, a, mu, delta, cfg);
    out.bb_converged = out.bb_converged && bb.converged;
    const Scalar fg = fractional_cost(prob, bb.x);
    ++out.iterations;
    if (fg < out.f_star) {
      out.f_star = fg;
      out.x_star = bb.x;
    }
    const Scalar gv = qm.g(bb.x, a);
    if (gv <= Scalar(0)) {
      u = a;
    } else if (gv >= delta) {
      l = a;
    } else {
      l = a - delta;
    }
    u = std::min(u, fg);
    out.history.push_back({a, gv, fg, l, u, bb.nodes});
  }
  out.lower = l;
  out.upper = u;
  return out;
}

}  // namespace stls
