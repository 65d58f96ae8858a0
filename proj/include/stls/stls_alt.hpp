#pragma once

#include "stls/lasso.hpp"

namespace stls {

struct AltConfig {
  double cost_tol_rel = 1e-10;  ///< stop when the relative cost decrease drops below this
  int max_outer = 500;
  CdConfig inner;
  bool record_iterates = false;

  void validate() const {
    require(cost_tol_rel > 0.0, "alt: cost_tol_rel must be positive");
    require(max_outer >= 1, "alt: max_outer must be at least 1");
    inner.validate();
  }
};

/// ||y - (A+E)x||^2 + ||E||_F^2 + penalty(x)
template <typename Scalar>
Scalar cost_joint(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x, const Mat<Scalar>& E,
                  const RegularizationSpec& reg) {
  require(x.size() == prob.n() && E.rows() == prob.m() && E.cols() == prob.n(), "cost_joint: dimension mismatch");
  return (prob.y() - (prob.A() + E) * x).squaredNorm() + E.squaredNorm() + penalty(x, reg);
}

template <typename Scalar>
Scalar cost_joint(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x, const Mat<Scalar>& E, Scalar lambda) {
  return cost_joint(prob, x, E, RegularizationSpec(static_cast<double>(lambda)));
}

/// ||y - Ax||^2 / (1 + ||x||^2)
template <typename Scalar>
Scalar fractional_cost(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x) {
  require(x.size() == prob.n(), "fractional_cost: dimension mismatch");
  return (prob.y() - prob.A() * x).squaredNorm() / (Scalar(1) + x.squaredNorm());
}

template <typename Scalar>
Scalar cost_fractional(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x, const RegularizationSpec& reg) {
  return fractional_cost(prob, x) + penalty(x, reg);
}

template <typename Scalar>
Scalar cost_fractional(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x, Scalar lambda) {
  return cost_fractional(prob, x, RegularizationSpec(static_cast<double>(lambda)));
}

/// Closed-form minimizer over E of ||y - Ax - Ex||^2 + ||E||_F^2.
template <typename Scalar>
Mat<Scalar> e_update(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x) {
  require(x.size() == prob.n() && x.allFinite(), "e_update: x must be finite with n entries");
  return (prob.y() - prob.A() * x) * x.transpose() / (Scalar(1) + x.squaredNorm());
}

namespace detail {

inline bool relative_decrease_below(double prev, double cur, double tol) {
  if (prev <= std::numeric_limits<double>::min()) return true;
  return (prev - cur) <= tol * prev;
}

}  // namespace detail

/// Block coordinate descent between a Lasso step in x (for the matrix A + E)
/// and the closed-form E step. Starts from E = 0 and x = 0, so the first x
/// iterate is the Lasso solution.
template <typename Scalar>
SolveReport<Scalar> solve_stls_alternating(const ProblemInstance<Scalar>& prob, const RegularizationSpec& reg,
                                           const AltConfig& cfg = {}) {
  cfg.validate();
  SolveReport<Scalar> rep;
  Vec<Scalar> x = Vec<Scalar>::Zero(prob.n());
  Mat<Scalar> E = Mat<Scalar>::Zero(prob.m(), prob.n());
  bool inner_ok = true;
  for (int it = 1; it <= cfg.max_outer; ++it) {
    const auto cd = lasso_cd<Scalar>(prob.y(), Mat<Scalar>(prob.A() + E), reg, x, cfg.inner);
    inner_ok = inner_ok && cd.converged;
    x = cd.x;
    E = e_update(prob, x);
    const Scalar c = cost_joint(prob, x, E, reg);
    rep.cost_trajectory.push_back(c);
    if (cfg.record_iterates) rep.x_iterates.push_back(x);
    rep.outer_iterations = it;
    if (it > 1 && detail::relative_decrease_below(static_cast<double>(rep.cost_trajectory[it - 2]),
                                                  static_cast<double>(c), cfg.cost_tol_rel)) {
      rep.converged = true;
      break;
    }
    if (c == Scalar(0)) {
      rep.converged = true;
      break;
    }
  }
  rep.x_hat = x;
  rep.perturbation = MatrixPerturbation<Scalar>{E};
  rep.final_cost = rep.cost_trajectory.back();
  return rep;
}

template <typename Scalar>
SolveReport<Scalar> solve_stls_alternating(const ProblemInstance<Scalar>& prob, Scalar lambda,
                                           const AltConfig& cfg = {}) {
  return solve_stls_alternating(prob, RegularizationSpec(static_cast<double>(lambda)), cfg);
}

/// Stationarity measures at a returned (x, E): the Lasso subgradient residual
/// for A + E, and the distance of E from the exact E step at x.
template <typename Scalar>
std::pair<Scalar, Scalar> alternating_stationarity(const ProblemInstance<Scalar>& prob, const Vec<Scalar>& x,
                                                   const Mat<Scalar>& E, const RegularizationSpec& reg) {
  const Mat<Scalar> M = prob.A() + E;
  const Scalar sub = lasso_subgradient_residual<Scalar>(prob.y(), M, x, reg);
  const Scalar de = (E - e_update(prob, x)).cwiseAbs().maxCoeff();
  return {sub, de};
}

// ---------------------------------------------------------------------------
// matrix (row-sparse) S-TLS

template <typename Scalar>
struct MatrixStlsResult {
  Mat<Scalar> X;
  Mat<Scalar> E;
  std::vector<Scalar> cost_trajectory;
  int outer_iterations = 0;
  bool converged = false;
};

/// ||Y - (A+E)X||_F^2 + ||E||_F^2 + lambda sum_v ||row_v(X)||_2
template <typename Scalar>
Scalar matrix_cost(const Mat<Scalar>& Y, const Mat<Scalar>& A, const Mat<Scalar>& X, const Mat<Scalar>& E,
                   Scalar lambda) {
  return (Y - (A + E) * X).squaredNorm() + E.squaredNorm() + lambda * X.rowwise().norm().sum();
}

/// E = (Y - AX) X' (I + X X')^{-1}, the minimizer of the E subproblem.
template <typename Scalar>
Mat<Scalar> matrix_e_update(const Mat<Scalar>& Y, const Mat<Scalar>& A, const Mat<Scalar>& X) {
  const Eigen::Index n = X.rows();
  const Mat<Scalar> G = Mat<Scalar>::Identity(n, n) + X * X.transpose();
  const Mat<Scalar> RXt = (Y - A * X) * X.transpose();
  return G.llt().solve(RXt.transpose()).transpose();
}

namespace detail {

/// Row-wise block coordinate descent for ||Y - M X||_F^2 + lambda sum ||row||.
template <typename Scalar>
bool row_group_cd(const Mat<Scalar>& Y, const Mat<Scalar>& M, Scalar lambda, Mat<Scalar>& X, const CdConfig& cfg) {
  const Eigen::Index n = M.cols();
  Vec<Scalar> a(n);
  for (Eigen::Index j = 0; j < n; ++j) a(j) = M.col(j).squaredNorm();
  Mat<Scalar> R = Y - M * X;
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    Scalar max_change = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(a(j) > Scalar(0))) {
        if (X.row(j).squaredNorm() > Scalar(0)) {
          R += M.col(j) * X.row(j);
          X.row(j).setZero();
        }
        continue;
      }
      const Vec<Scalar> old = X.row(j).transpose();
      Vec<Scalar> next;
      if (old.size() == 1) {
        const Scalar b = M.col(j).dot(R.col(0)) + a(j) * old(0);
        next = Vec<Scalar>::Constant(1, soft_threshold(b, a(j), lambda));
      } else {
        const Vec<Scalar> z = R.transpose() * M.col(j) + a(j) * old;
        next = group_soft_threshold(z, lambda / Scalar(2)) / a(j);
      }
      const Vec<Scalar> d = next - old;
      if (d.cwiseAbs().maxCoeff() > Scalar(0)) {
        R -= M.col(j) * d.transpose();
        X.row(j) = next.transpose();
        max_change = std::max(max_change, d.cwiseAbs().maxCoeff());
      }
    }
    if (max_change < cfg.tol) return true;
  }
  return false;
}

}  // namespace detail

template <typename Scalar>
MatrixStlsResult<Scalar> solve_matrix_stls(const Mat<Scalar>& Y, const Mat<Scalar>& A, Scalar lambda,
                                           const AltConfig& cfg = {}) {
  cfg.validate();
  require(Y.rows() == A.rows(), "matrix_stls: Y and A must have the same rows");
  require(Y.cols() >= 1, "matrix_stls: Y must have at least one column");
  require(lambda >= Scalar(0), "matrix_stls: lambda must be nonnegative");
  require(Y.allFinite() && A.allFinite(), "matrix_stls: entries must be finite");
  MatrixStlsResult<Scalar> out;
  out.X = Mat<Scalar>::Zero(A.cols(), Y.cols());
  out.E = Mat<Scalar>::Zero(A.rows(), A.cols());
  for (int it = 1; it <= cfg.max_outer; ++it) {
    detail::row_group_cd<Scalar>(Y, Mat<Scalar>(A + out.E), lambda, out.X, cfg.inner);
    out.E = matrix_e_update<Scalar>(Y, A, out.X);
    const Scalar c = matrix_cost<Scalar>(Y, A, out.X, out.E, lambda);
    out.cost_trajectory.push_back(c);
    out.outer_iterations = it;
    if (c == Scalar(0) ||
        (it > 1 && detail::relative_decrease_below(static_cast<double>(out.cost_trajectory[it - 2]),
                                                   static_cast<double>(c), cfg.cost_tol_rel))) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace stls
