#pragma once

#include "stls/stls_alt.hpp"

namespace stls {

struct WsstlsConfig {
  double cost_tol_rel = 1e-10;
  int max_outer = 500;
  CdConfig inner;
  bool record_iterates = false;
  /// When positive, stop once the x subgradient residual at the current epsA is
  /// below this instead of using cost_tol_rel.
  double stationarity_tol = 0.0;

  void validate() const {
    require(cost_tol_rel > 0.0, "wsstls: cost_tol_rel must be positive");
    require(max_outer >= 1, "wsstls: max_outer must be at least 1");
    require(stationarity_tol >= 0.0, "wsstls: stationarity_tol must be nonnegative");
    inner.validate();
  }
};

/// Structure, problem and weight checked against each other, with (S^y)^+
/// computed once.
template <typename Scalar>
class WsstlsContext {
 public:
  WsstlsContext(const ProblemInstance<Scalar>& prob, const AffineStructure<Scalar>& s, const WeightMatrix<Scalar>& W)
      : prob_(&prob), s_(&s), W_(&W) {
    require(s.m() == prob.m() && s.n() == prob.n(), "wsstls: structure does not match problem");
    require(W.n_a() == s.n_a() && W.n_y() == s.n_y(), "wsstls: weight partition does not match structure");
    require(s.n_y() >= 1, "wsstls: at least one vector atom is required");
    require(s.n_y() <= s.m(), "wsstls: wide S^y is not supported");
    const auto& Sy = s.vector_atoms();
    sy_identity_ = Sy.rows() == Sy.cols() && Sy == Mat<Scalar>::Identity(Sy.rows(), Sy.cols());
    if (sy_identity_) {
      Sy_pinv_ = Mat<Scalar>::Identity(Sy.cols(), Sy.rows());
    } else {
      require(numerical_rank(Sy) == Sy.cols(), "wsstls: S^y must have full column rank");
      Sy_pinv_ = pinv(Sy);
    }
  }

  const ProblemInstance<Scalar>& problem() const { return *prob_; }
  const AffineStructure<Scalar>& structure() const { return *s_; }
  const WeightMatrix<Scalar>& weight() const { return *W_; }
  const Mat<Scalar>& Sy_pinv() const { return Sy_pinv_; }

  /// (S^y)^+ M without forming the product when S^y = I.
  template <typename Derived>
  Mat<Scalar> apply_pinv(const Eigen::MatrixBase<Derived>& M) const {
    if (sy_identity_) return M;
    return Sy_pinv_ * M;
  }
  /// W_yy M
  Mat<Scalar> apply_wyy(const Mat<Scalar>& M) const {
    if (W_->is_diagonal()) return W_->W_yy().diagonal().asDiagonal() * M;
    return W_->W_yy() * M;
  }

 private:
  const ProblemInstance<Scalar>* prob_;
  const AffineStructure<Scalar>* s_;
  const WeightMatrix<Scalar>* W_;
  Mat<Scalar> Sy_pinv_;
  bool sy_identity_ = false;
};

/// epsY = (S^y)^+ [S^A(I kron x) epsA - (y - Ax)]
template <typename Scalar>
Vec<Scalar> eps_y_eliminate(const WsstlsContext<Scalar>& ctx, const Vec<Scalar>& x, const Vec<Scalar>& eps_a) {
  const auto& s = ctx.structure();
  require(eps_a.size() == s.n_a(), "eps_y_eliminate: epsA must have n_A entries");
  const auto gr = g_and_r(s, ctx.problem(), x);
  return ctx.apply_pinv(Vec<Scalar>(gr.G.leftCols(s.n_a()) * eps_a - gr.r));
}

template <typename Scalar>
Vec<Scalar> eps_y_eliminate(const AffineStructure<Scalar>& s, const ProblemInstance<Scalar>& prob,
                            const Vec<Scalar>& x, const Vec<Scalar>& eps_a) {
  const auto W = WeightMatrix<Scalar>::identity(s.n_a(), s.n_y());
  return eps_y_eliminate(WsstlsContext<Scalar>(prob, s, W), x, eps_a);
}

/// eps' W eps + penalty(x) with epsY eliminated through the constraint.
template <typename Scalar>
Scalar wsstls_cost(const WsstlsContext<Scalar>& ctx, const Vec<Scalar>& x, const Vec<Scalar>& eps_a,
                   const RegularizationSpec& reg) {
  const auto& s = ctx.structure();
  Vec<Scalar> eps(s.n_p());
  eps << eps_a, eps_y_eliminate(ctx, x, eps_a);
  return eps.dot(ctx.weight().W() * eps) + penalty(x, reg);
}

/// r' [G W^-1 G']^+ r + penalty(x), with G the constraint matrix
/// [S^A(I kron x), -S^y].
template <typename Scalar>
Scalar wsstls_cost_reduced(const WsstlsContext<Scalar>& ctx, const Vec<Scalar>& x, const RegularizationSpec& reg) {
  const auto& prob = ctx.problem();
  const Mat<Scalar> G = constraint_matrix(ctx.structure(), x);
  const Vec<Scalar> r = prob.y() - prob.A() * x;
  const Mat<Scalar> WinvGt = ctx.weight().W().llt().solve(G.transpose());
  const Mat<Scalar> K = G * WinvGt;
  return r.dot(pinv(K) * r) + penalty(x, reg);
}

template <typename Scalar>
Scalar wsstls_cost_reduced(const ProblemInstance<Scalar>& prob, const AffineStructure<Scalar>& s,
                           const WeightMatrix<Scalar>& W, const Vec<Scalar>& x, const RegularizationSpec& reg) {
  return wsstls_cost_reduced(WsstlsContext<Scalar>(prob, s, W), x, reg);
}

/// Closed-form minimizer over epsA of the weighted quadratic with x fixed:
///   epsA = {S W S'}^+ S [W_Ay; W_yy] (S^y)^+ r,  S = [I, ((S^y)^+ S^A (I kron x))'].
template <typename Scalar>
Vec<Scalar> eps_a_update(const WsstlsContext<Scalar>& ctx, const Vec<Scalar>& x) {
  const auto& s = ctx.structure();
  const auto& W = ctx.weight();
  const auto gr = g_and_r(s, ctx.problem(), x);
  const Mat<Scalar> C = ctx.apply_pinv(gr.G.leftCols(s.n_a()));  // n_y x n_A
  const Vec<Scalar> d = ctx.apply_pinv(gr.r);
  const Mat<Scalar> WyyC = ctx.apply_wyy(C);
  const Mat<Scalar> WayC = W.W_Ay() * C;
  Mat<Scalar> M = W.W_AA();
  M += WayC + WayC.transpose() + C.transpose() * WyyC;
  const Vec<Scalar> rhs = W.W_Ay() * d + C.transpose() * ctx.apply_wyy(Mat<Scalar>(d)).col(0);
  Eigen::LLT<Mat<Scalar>> llt(M);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  return pinv(M) * rhs;
}

template <typename Scalar>
Vec<Scalar> eps_a_update(const AffineStructure<Scalar>& s, const ProblemInstance<Scalar>& prob,
                         const WeightMatrix<Scalar>& W, const Vec<Scalar>& x) {
  return eps_a_update(WsstlsContext<Scalar>(prob, s, W), x);
}

/// Coordinate descent in x with epsA fixed. Columns are those of
/// (S^y)^+ (A + sum_k epsA_k S_k^A), the target is (S^y)^+ y, and each scalar
/// step minimizes ||alpha t - e||^2_{W_yy} + 2 epsA' W_Ay alpha t + lambda |t|.
template <typename Scalar>
CdResult<Scalar> wsstls_x_update(const WsstlsContext<Scalar>& ctx, const Vec<Scalar>& eps_a,
                                 const RegularizationSpec& reg, const Vec<Scalar>& x_init, const CdConfig& cfg = {}) {
  const auto& s = ctx.structure();
  const auto& prob = ctx.problem();
  require(eps_a.size() == s.n_a(), "wsstls_x_update: epsA must have n_A entries");
  const Mat<Scalar> alpha = ctx.apply_pinv(Mat<Scalar>(prob.A() + s.combine_matrix_atoms(eps_a)));
  const Vec<Scalar> target = ctx.apply_pinv(prob.y());
  const Mat<Scalar> Qalpha = ctx.apply_wyy(alpha);
  const Vec<Scalar> w = ctx.weight().W_Ay().transpose() * eps_a;
  const Vec<Scalar> lin = alpha.transpose() * w;
  return detail::weighted_cd<Scalar>(alpha, Qalpha, target, lin, reg, x_init, cfg);
}

/// Subgradient residual of the convex x subproblem at fixed epsA.
template <typename Scalar>
Scalar wsstls_x_stationarity(const WsstlsContext<Scalar>& ctx, const Vec<Scalar>& x, const Vec<Scalar>& eps_a,
                             const RegularizationSpec& reg) {
  const auto& s = ctx.structure();
  const auto& prob = ctx.problem();
  const Mat<Scalar> alpha = ctx.apply_pinv(Mat<Scalar>(prob.A() + s.combine_matrix_atoms(eps_a)));
  const Vec<Scalar> target = ctx.apply_pinv(prob.y());
  const Vec<Scalar> w = ctx.weight().W_Ay().transpose() * eps_a;
  // gradient of (alpha x - target)' W_yy (alpha x - target) + 2 w' alpha x
  const Vec<Scalar> grad = Scalar(2) * alpha.transpose() *
                           (ctx.apply_wyy(Mat<Scalar>(alpha * x - target)).col(0) + w);
  const Scalar lambda = static_cast<Scalar>(reg.lambda);
  Scalar worst = 0;
  if (!reg.grouped()) {
    for (Eigen::Index j = 0; j < x.size(); ++j)
      worst = std::max(worst, x(j) != Scalar(0) ? std::abs(grad(j) + lambda * sign(x(j)))
                                                : std::max(Scalar(0), std::abs(grad(j)) - lambda));
    return worst;
  }
  for (const auto& g : reg.groups->groups()) {
    Vec<Scalar> gg(static_cast<Eigen::Index>(g.size())), xg(gg.size());
    for (std::size_t r = 0; r < g.size(); ++r) {
      gg(static_cast<Eigen::Index>(r)) = grad(g[r]);
      xg(static_cast<Eigen::Index>(r)) = x(g[r]);
    }
    const Scalar nx = xg.norm();
    worst = std::max(worst, nx > Scalar(0) ? (gg + lambda * xg / nx).norm() : std::max(Scalar(0), gg.norm() - lambda));
  }
  return worst;
}

/// Block coordinate descent between the x step and the closed-form epsA step,
/// starting from epsA = 0.
template <typename Scalar>
SolveReport<Scalar> solve_wsstls(const WsstlsContext<Scalar>& ctx, const RegularizationSpec& reg,
                                 const WsstlsConfig& cfg = {}) {
  cfg.validate();
  const auto& s = ctx.structure();
  SolveReport<Scalar> rep;
  Vec<Scalar> x = Vec<Scalar>::Zero(s.n());
  Vec<Scalar> eps_a = Vec<Scalar>::Zero(s.n_a());
  for (int it = 1; it <= cfg.max_outer; ++it) {
    x = wsstls_x_update(ctx, eps_a, reg, x, cfg.inner).x;
    eps_a = eps_a_update(ctx, x);
    const Scalar c = wsstls_cost(ctx, x, eps_a, reg);
    rep.cost_trajectory.push_back(c);
    if (cfg.record_iterates) rep.x_iterates.push_back(x);
    rep.outer_iterations = it;
    const bool stop = cfg.stationarity_tol > 0.0
                          ? static_cast<double>(wsstls_x_stationarity(ctx, x, eps_a, reg)) < cfg.stationarity_tol
                          : it > 1 && detail::relative_decrease_below(static_cast<double>(rep.cost_trajectory[it - 2]),
                                                                      static_cast<double>(c), cfg.cost_tol_rel);
    if (c == Scalar(0) || stop) {
      rep.converged = true;
      break;
    }
  }
  rep.x_hat = x;
  rep.perturbation = StructuredPerturbation<Scalar>{eps_a, eps_y_eliminate(ctx, x, eps_a)};
  rep.final_cost = rep.cost_trajectory.back();
  return rep;
}

template <typename Scalar>
SolveReport<Scalar> solve_wsstls(const ProblemInstance<Scalar>& prob, const AffineStructure<Scalar>& s,
                                 const WeightMatrix<Scalar>& W, const RegularizationSpec& reg,
                                 const WsstlsConfig& cfg = {}) {
  return solve_wsstls(WsstlsContext<Scalar>(prob, s, W), reg, cfg);
}

}  // namespace stls
