#pragma once

#include "stls/model.hpp"

namespace stls {

struct CdConfig {
  double tol = 1e-8;  ///< stop when the largest coordinate change falls below this
  int max_sweeps = 1000;

  void validate() const {
    require(tol > 0.0, "cd: tol must be positive");
    require(max_sweeps >= 1, "cd: max_sweeps must be at least 1");
  }
};

template <typename Scalar>
struct CdResult {
  Vec<Scalar> x;
  int sweeps = 0;
  bool converged = false;
};

/// argmin_t  a t^2 - 2 b t + lambda |t|  for a > 0.
template <typename Scalar>
Scalar soft_threshold(Scalar b, Scalar a, Scalar lambda) {
  const Scalar shrunk = std::abs(b) - lambda / Scalar(2);
  return shrunk > Scalar(0) ? sign(b) * shrunk / a : Scalar(0);
}

/// argmin_x ||e - alpha x||^2 + lambda |x|.
template <typename D1, typename D2>
typename D1::Scalar scalar_lasso_update(const Eigen::MatrixBase<D1>& e, const Eigen::MatrixBase<D2>& alpha,
                                        typename D1::Scalar lambda) {
  using Scalar = typename D1::Scalar;
  require(e.size() == alpha.size(), "scalar_lasso_update: length mismatch");
  require(lambda >= Scalar(0), "scalar_lasso_update: lambda must be nonnegative");
  const Scalar a = alpha.squaredNorm();
  require(a > Scalar(0), "scalar_lasso_update: zero column");
  return soft_threshold(e.dot(alpha), a, lambda);
}

/// max(1 - t/||z||, 0) z, the proximal map of t||.||_2.
template <typename Derived>
Vec<typename Derived::Scalar> group_soft_threshold(const Eigen::MatrixBase<Derived>& z,
                                                   typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  require(t >= Scalar(0), "group_soft_threshold: t must be nonnegative");
  const Scalar nz = z.norm();
  if (nz <= t || nz == Scalar(0)) return Vec<Scalar>::Zero(z.size());
  return (Scalar(1) - t / nz) * z;
}

/// argmin_t  t'Qt - 2 b't + lambda ||t||_2  for symmetric positive
/// semidefinite Q. Closed form when Q is a multiple of the identity, otherwise
/// the norm of the solution is found from the secular equation
///   sum_i c_i^2 / (q_i rho + lambda/2)^2 = 1   (c = V'b, Q = V diag(q) V').
template <typename Scalar>
Vec<Scalar> block_group_update(const Mat<Scalar>& Q, const Vec<Scalar>& b, Scalar lambda) {
  const Eigen::Index k = b.size();
  const Scalar kappa = lambda / Scalar(2);
  const Scalar nb = b.norm();
  if (nb <= kappa) return Vec<Scalar>::Zero(k);

  const Scalar q0 = Q(0, 0);
  const bool isotropic =
      (Q - q0 * Mat<Scalar>::Identity(k, k)).cwiseAbs().maxCoeff() <= Scalar(1e-14) * std::abs(q0);
  if (isotropic) {
    require(q0 > Scalar(0), "block_group_update: zero block");
    return group_soft_threshold(b, kappa) / q0;
  }

  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(Q);
  const Vec<Scalar> q = es.eigenvalues().cwiseMax(Scalar(0));
  const Vec<Scalar> c = es.eigenvectors().transpose() * b;
  auto h = [&](Scalar rho) {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const Scalar d = q(i) * rho + kappa;
      s += c(i) * c(i) / (d * d);
    }
    return s;
  };
  Scalar lo = 0;
  Scalar hi = q(0) > Scalar(0) ? (nb - kappa) / q(0) : Scalar(1);
  while (h(hi) > Scalar(1) && hi < std::numeric_limits<Scalar>::max() / 4) hi *= 2;
  for (int it = 0; it < 200 && hi - lo > std::numeric_limits<Scalar>::epsilon() * hi; ++it) {
    const Scalar mid = (lo + hi) / 2;
    (h(mid) > Scalar(1) ? lo : hi) = mid;
  }
  const Scalar rho = hi;
  Vec<Scalar> t(k);
  for (Eigen::Index i = 0; i < k; ++i) t(i) = c(i) * rho / (q(i) * rho + kappa);
  return es.eigenvectors() * t;
}

namespace detail {

/// Cyclic coordinate descent on
///   (alpha x - target)' Q (alpha x - target) + 2 lin' x + penalty(x),
/// given Qalpha = Q alpha. Q = I and lin = 0 gives the plain Lasso.
template <typename Scalar>
CdResult<Scalar> weighted_cd(const Mat<Scalar>& alpha, const Mat<Scalar>& Qalpha, const Vec<Scalar>& target,
                             const Vec<Scalar>& lin, const RegularizationSpec& reg, const Vec<Scalar>& x_init,
                             const CdConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = alpha.cols();
  require(x_init.size() == n, "cd: x_init length mismatch");
  require(target.size() == alpha.rows() && Qalpha.rows() == alpha.rows() && Qalpha.cols() == n,
          "cd: dimension mismatch");
  const Scalar lambda = static_cast<Scalar>(reg.lambda);

  CdResult<Scalar> out;
  out.x = x_init;
  Vec<Scalar> resid = target - alpha * out.x;

  if (!reg.grouped()) {
    Vec<Scalar> a(n);
    for (Eigen::Index j = 0; j < n; ++j) a(j) = alpha.col(j).dot(Qalpha.col(j));
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(a(j) > Scalar(0)) && out.x(j) != Scalar(0)) {
        resid += alpha.col(j) * out.x(j);
        out.x(j) = 0;
      }
    for (out.sweeps = 1; out.sweeps <= cfg.max_sweeps; ++out.sweeps) {
      Scalar max_change = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(a(j) > Scalar(0))) continue;
        const Scalar old = out.x(j);
        const Scalar b = Qalpha.col(j).dot(resid) + a(j) * old - lin(j);
        const Scalar next = soft_threshold(b, a(j), lambda);
        if (next != old) {
          resid -= alpha.col(j) * (next - old);
          out.x(j) = next;
          max_change = std::max(max_change, std::abs(next - old));
        }
      }
      if (max_change < cfg.tol) {
        out.converged = true;
        break;
      }
    }
  } else {
    const GroupMap& gm = *reg.groups;
    require(gm.dimension() == n, "cd: group map dimension mismatch");
    std::vector<Mat<Scalar>> Qg;
    Qg.reserve(gm.size());
    for (const auto& g : gm.groups()) {
      const auto k = static_cast<Eigen::Index>(g.size());
      Mat<Scalar> q(k, k);
      for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) q(r, c) = alpha.col(g[r]).dot(Qalpha.col(g[c]));
      Qg.push_back((q + q.transpose()) / Scalar(2));
    }
    for (out.sweeps = 1; out.sweeps <= cfg.max_sweeps; ++out.sweeps) {
      Scalar max_change = 0;
      for (std::size_t gi = 0; gi < gm.size(); ++gi) {
        const auto& g = gm.groups()[gi];
        const auto k = static_cast<Eigen::Index>(g.size());
        const Mat<Scalar>& q = Qg[gi];
        if (!(q.trace() > Scalar(0))) {
          for (auto i : g) {
            resid += alpha.col(i) * out.x(i);
            out.x(i) = 0;
          }
          continue;
        }
        Vec<Scalar> old(k), b(k);
        for (Eigen::Index r = 0; r < k; ++r) old(r) = out.x(g[r]);
        for (Eigen::Index r = 0; r < k; ++r) b(r) = Qalpha.col(g[r]).dot(resid) - lin(g[r]);
        b += q * old;
        const Vec<Scalar> next = block_group_update<Scalar>(q, b, lambda);
        for (Eigen::Index r = 0; r < k; ++r) {
          const Scalar d = next(r) - old(r);
          if (d != Scalar(0)) {
            resid -= alpha.col(g[r]) * d;
            out.x(g[r]) = next(r);
            max_change = std::max(max_change, std::abs(d));
          }
        }
      }
      if (max_change < cfg.tol) {
        out.converged = true;
        break;
      }
    }
  }
  if (!out.converged) out.sweeps = cfg.max_sweeps;
  return out;
}

}  // namespace detail

/// Cyclic coordinate descent for min ||y - M x||^2 + penalty(x), warm started
/// at x_init. Zero columns pin their coefficient to 0.
template <typename Scalar>
CdResult<Scalar> lasso_cd(const Vec<Scalar>& y, const Mat<Scalar>& M, const RegularizationSpec& reg,
                          const Vec<Scalar>& x_init, const CdConfig& cfg = {}) {
  require(y.size() == M.rows(), "lasso_cd: y length must equal rows of M");
  require(reg.lambda >= 0.0, "lasso_cd: lambda must be nonnegative");
  return detail::weighted_cd<Scalar>(M, M, y, Vec<Scalar>::Zero(M.cols()), reg, x_init, cfg);
}

template <typename Scalar>
CdResult<Scalar> lasso_cd(const Vec<Scalar>& y, const Mat<Scalar>& M, Scalar lambda, const Vec<Scalar>& x_init,
                          const CdConfig& cfg = {}) {
  return lasso_cd<Scalar>(y, M, RegularizationSpec(static_cast<double>(lambda)), x_init, cfg);
}

template <typename Scalar>
Scalar lasso_objective(const Vec<Scalar>& y, const Mat<Scalar>& M, const Vec<Scalar>& x,
                       const RegularizationSpec& reg) {
  return (y - M * x).squaredNorm() + penalty(x, reg);
}

/// Largest distance from zero of the subdifferential of
/// ||y - Mx||^2 + penalty(x) at x, taken per coordinate (or per group).
template <typename Scalar>
Scalar lasso_subgradient_residual(const Vec<Scalar>& y, const Mat<Scalar>& M, const Vec<Scalar>& x,
                                  const RegularizationSpec& reg) {
  const Vec<Scalar> grad = Scalar(2) * M.transpose() * (M * x - y);
  const Scalar lambda = static_cast<Scalar>(reg.lambda);
  Scalar worst = 0;
  if (!reg.grouped()) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      Scalar r;
      if (x(j) != Scalar(0)) {
        r = std::abs(grad(j) + lambda * sign(x(j)));
      } else {
        r = std::max(Scalar(0), std::abs(grad(j)) - lambda);
      }
      worst = std::max(worst, r);
    }
    return worst;
  }
  for (const auto& g : reg.groups->groups()) {
    Vec<Scalar> gg(static_cast<Eigen::Index>(g.size())), xg(gg.size());
    for (std::size_t r = 0; r < g.size(); ++r) {
      gg(static_cast<Eigen::Index>(r)) = grad(g[r]);
      xg(static_cast<Eigen::Index>(r)) = x(g[r]);
    }
    const Scalar nx = xg.norm();
    const Scalar r = nx > Scalar(0) ? (gg + lambda * xg / nx).norm() : std::max(Scalar(0), gg.norm() - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace stls
