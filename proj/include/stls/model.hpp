#pragma once

#include <complex>
#include <numeric>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "stls/core.hpp"

namespace stls {

/// Observed pair (y, A) of an errors-in-variables model.
template <typename Scalar>
class ProblemInstance {
 public:
  ProblemInstance(Vec<Scalar> y, Mat<Scalar> A) : y_(std::move(y)), A_(std::move(A)) {
    require(A_.rows() >= 1 && A_.cols() >= 1, "problem: m and n must be positive");
    require(y_.size() == A_.rows(), "problem: y length must equal rows of A");
    require(all_finite(y_) && all_finite(A_), "problem: entries must be finite");
  }

  const Vec<Scalar>& y() const { return y_; }
  const Mat<Scalar>& A() const { return A_; }
  Eigen::Index m() const { return A_.rows(); }
  Eigen::Index n() const { return A_.cols(); }

 private:
  Vec<Scalar> y_;
  Mat<Scalar> A_;
};

/// Partition of {0..n-1} into disjoint groups.
class GroupMap {
 public:
  GroupMap() = default;
  GroupMap(std::vector<std::vector<Eigen::Index>> groups, Eigen::Index n)
      : groups_(std::move(groups)), owner_(static_cast<std::size_t>(n), -1) {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      require(!groups_[g].empty(), "group map: empty group");
      for (Eigen::Index i : groups_[g]) {
        require(i >= 0 && i < n, "group map: index out of range");
        auto& slot = owner_[static_cast<std::size_t>(i)];
        require(slot < 0, "group map: groups overlap");
        slot = static_cast<Eigen::Index>(g);
      }
    }
    for (auto o : owner_) require(o >= 0, "group map: groups do not cover all indices");
  }

  static GroupMap singletons(Eigen::Index n) {
    std::vector<std::vector<Eigen::Index>> g(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = {i};
    return GroupMap(std::move(g), n);
  }

  const std::vector<std::vector<Eigen::Index>>& groups() const { return groups_; }
  std::size_t size() const { return groups_.size(); }
  Eigen::Index dimension() const { return static_cast<Eigen::Index>(owner_.size()); }
  Eigen::Index group_of(Eigen::Index i) const { return owner_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<std::vector<Eigen::Index>> groups_;
  std::vector<Eigen::Index> owner_;
};

/// Sparsity weight and penalty shape: entrywise l1, or a sum of group l2 norms.
struct RegularizationSpec {
  double lambda = 0.0;
  std::optional<GroupMap> groups;

  RegularizationSpec() = default;
  explicit RegularizationSpec(double l) : lambda(l) { require(l >= 0.0, "lambda must be nonnegative"); }
  RegularizationSpec(double l, GroupMap g) : lambda(l), groups(std::move(g)) {
    require(l >= 0.0, "lambda must be nonnegative");
  }
  bool grouped() const { return groups.has_value(); }
};

template <typename Derived>
typename Derived::Scalar penalty(const Eigen::MatrixBase<Derived>& x, const RegularizationSpec& reg) {
  using Scalar = typename Derived::Scalar;
  if (!reg.grouped()) return Scalar(reg.lambda) * x.template lpNorm<1>();
  require(reg.groups->dimension() == x.size(), "group map dimension mismatch");
  Scalar s = 0;
  for (const auto& g : reg.groups->groups()) {
    Scalar sq = 0;
    for (auto i : g) sq += x(i) * x(i);
    s += std::sqrt(sq);
  }
  return Scalar(reg.lambda) * s;
}

/// Affine structure S(p) = S0 + [sum_k pA_k S_k^A | sum_k py_k s_k^y].
///
/// Sign convention: the perturbation constraint is always read as
///   S^A (I kron x) epsA - S^y epsY = y - A x,
/// i.e. the constraint matrix is [S^A(I kron x), -S^y] (see
/// constraint_matrix). g_and_r returns the +S^y form for reference only.
template <typename Scalar>
class AffineStructure {
 public:
  AffineStructure(Mat<Scalar> S0, std::vector<SparseMat<Scalar>> matrix_atoms, Mat<Scalar> vector_atoms)
      : S0_(std::move(S0)), atoms_(std::move(matrix_atoms)), Sy_(std::move(vector_atoms)) {
    require(S0_.rows() >= 1 && S0_.cols() >= 2, "structure: S0 must be m x (n+1)");
    require(Sy_.rows() == m(), "structure: vector atoms must have m rows");
    for (const auto& a : atoms_)
      require(a.rows() == m() && a.cols() == n(), "structure: matrix atom must be m x n");
  }

  /// Zero S0 of the given size.
  AffineStructure(Eigen::Index m, Eigen::Index n, std::vector<SparseMat<Scalar>> matrix_atoms,
                  Mat<Scalar> vector_atoms)
      : AffineStructure(Mat<Scalar>::Zero(m, n + 1), std::move(matrix_atoms), std::move(vector_atoms)) {}

  Eigen::Index m() const { return S0_.rows(); }
  Eigen::Index n() const { return S0_.cols() - 1; }
  Eigen::Index n_a() const { return static_cast<Eigen::Index>(atoms_.size()); }
  Eigen::Index n_y() const { return Sy_.cols(); }
  Eigen::Index n_p() const { return n_a() + n_y(); }

  const Mat<Scalar>& S0() const { return S0_; }
  const std::vector<SparseMat<Scalar>>& matrix_atoms() const { return atoms_; }
  const SparseMat<Scalar>& matrix_atom(Eigen::Index k) const { return atoms_[static_cast<std::size_t>(k)]; }
  const Mat<Scalar>& vector_atoms() const { return Sy_; }

  AffineStructure with_offset(Mat<Scalar> S0) const { return AffineStructure(std::move(S0), atoms_, Sy_); }

  /// sum_k c_k S_k^A as a dense m x n matrix.
  template <typename Derived>
  Mat<Scalar> combine_matrix_atoms(const Eigen::MatrixBase<Derived>& c) const {
    require(c.size() == n_a(), "structure: coefficient length must equal n_A");
    Mat<Scalar> out = Mat<Scalar>::Zero(m(), n());
    for (Eigen::Index k = 0; k < n_a(); ++k)
      if (c(k) != Scalar(0)) out += c(k) * matrix_atom(k);
    return out;
  }

 private:
  Mat<Scalar> S0_;
  std::vector<SparseMat<Scalar>> atoms_;
  Mat<Scalar> Sy_;
};

/// Unstructured parameterization: one canonical atom per entry of A (column
/// major) and S^y = I.
template <typename Scalar>
AffineStructure<Scalar> canonical_structure(Eigen::Index m, Eigen::Index n) {
  std::vector<SparseMat<Scalar>> atoms;
  atoms.reserve(static_cast<std::size_t>(m * n));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) {
      SparseMat<Scalar> s(m, n);
      s.insert(i, j) = Scalar(1);
      s.makeCompressed();
      atoms.push_back(std::move(s));
    }
  return AffineStructure<Scalar>(m, n, std::move(atoms), Mat<Scalar>::Identity(m, m));
}

template <typename Scalar, typename Derived>
Mat<Scalar> structured_matrix(const AffineStructure<Scalar>& s, const Eigen::MatrixBase<Derived>& p) {
  require(p.size() == s.n_p(), "structured_matrix: p must have n_A + n_y entries");
  Mat<Scalar> out = s.S0();
  out.leftCols(s.n()) += s.combine_matrix_atoms(p.head(s.n_a()));
  out.col(s.n()) += s.vector_atoms() * p.tail(s.n_y());
  return out;
}

/// S^A (I kron x): column k is S_k^A x.
template <typename Scalar, typename Derived>
Mat<Scalar> atoms_times_x(const AffineStructure<Scalar>& s, const Eigen::MatrixBase<Derived>& x) {
  require(x.size() == s.n(), "atoms_times_x: x must have n entries");
  const Vec<Scalar> xv = x;
  Mat<Scalar> B(s.m(), s.n_a());
  for (Eigen::Index k = 0; k < s.n_a(); ++k) B.col(k) = s.matrix_atom(k) * xv;
  return B;
}

template <typename Scalar>
struct GR {
  Mat<Scalar> G;
  Vec<Scalar> r;
};

template <typename Scalar, typename Derived>
GR<Scalar> g_and_r(const AffineStructure<Scalar>& s, const ProblemInstance<Scalar>& prob,
                   const Eigen::MatrixBase<Derived>& x) {
  require(s.m() == prob.m() && s.n() == prob.n(), "g_and_r: structure does not match problem");
  require(x.size() == prob.n() && x.allFinite(), "g_and_r: x must be finite with n entries");
  GR<Scalar> out;
  out.G.resize(s.m(), s.n_p());
  out.G.leftCols(s.n_a()) = atoms_times_x(s, x);
  out.G.rightCols(s.n_y()) = s.vector_atoms();
  out.r = prob.y() - prob.A() * x;
  return out;
}

/// [S^A (I kron x), -S^y], the matrix of the perturbation constraint.
template <typename Scalar, typename Derived>
Mat<Scalar> constraint_matrix(const AffineStructure<Scalar>& s, const Eigen::MatrixBase<Derived>& x) {
  Mat<Scalar> G(s.m(), s.n_p());
  G.leftCols(s.n_a()) = atoms_times_x(s, x);
  G.rightCols(s.n_y()) = -s.vector_atoms();
  return G;
}

/// Symmetric positive-definite weight on the stacked perturbation [epsA; epsY].
template <typename Scalar>
class WeightMatrix {
 public:
  WeightMatrix(Mat<Scalar> W, Eigen::Index n_a) : W_(std::move(W)), n_a_(n_a) {
    require(W_.rows() == W_.cols(), "weight: W must be square");
    require(n_a_ >= 0 && n_a_ <= W_.rows(), "weight: block partition out of range");
    require(W_.allFinite(), "weight: entries must be finite");
    const Scalar scale = std::max(Scalar(1), W_.cwiseAbs().maxCoeff());
    require((W_ - W_.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-12) * scale, "weight: W must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(W_, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    require(ev(0) > rank_tolerance<Scalar>(W_.rows(), W_.cols(), ev(ev.size() - 1)),
            "weight: W must be positive definite");
    diagonal_ = (W_ - Mat<Scalar>(W_.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == Scalar(0);
  }

  static WeightMatrix identity(Eigen::Index n_a, Eigen::Index n_y) {
    return WeightMatrix(Mat<Scalar>::Identity(n_a + n_y, n_a + n_y), n_a);
  }
  static WeightMatrix block_diagonal(Scalar wa, Eigen::Index n_a, Scalar wy, Eigen::Index n_y) {
    Vec<Scalar> d(n_a + n_y);
    d.head(n_a).setConstant(wa);
    d.tail(n_y).setConstant(wy);
    return WeightMatrix(Mat<Scalar>(d.asDiagonal()), n_a);
  }

  const Mat<Scalar>& W() const { return W_; }
  Eigen::Index n_a() const { return n_a_; }
  Eigen::Index n_y() const { return W_.rows() - n_a_; }
  bool is_diagonal() const { return diagonal_; }

  auto W_AA() const { return W_.topLeftCorner(n_a_, n_a_); }
  auto W_Ay() const { return W_.topRightCorner(n_a_, n_y()); }
  auto W_yy() const { return W_.bottomRightCorner(n_y(), n_y()); }

 private:
  Mat<Scalar> W_;
  Eigen::Index n_a_;
  bool diagonal_ = false;
};

/// Perturbation estimate of the unstructured solvers.
template <typename Scalar>
struct MatrixPerturbation {
  Mat<Scalar> E;
};

/// Perturbation estimate of the weighted/structured solver.
template <typename Scalar>
struct StructuredPerturbation {
  Vec<Scalar> eps_a;
  Vec<Scalar> eps_y;
};

template <typename Scalar>
struct SolveReport {
  Vec<Scalar> x_hat;
  std::variant<MatrixPerturbation<Scalar>, StructuredPerturbation<Scalar>> perturbation;
  std::vector<Scalar> cost_trajectory;
  int outer_iterations = 0;
  bool converged = false;
  Scalar final_cost = 0;
  /// x iterate after each outer iteration; filled only when requested.
  std::vector<Vec<Scalar>> x_iterates;

  const Mat<Scalar>& e_hat() const { return std::get<MatrixPerturbation<Scalar>>(perturbation).E; }
  const StructuredPerturbation<Scalar>& eps() const { return std::get<StructuredPerturbation<Scalar>>(perturbation); }
};

// ---------------------------------------------------------------------------
// complex -> real lifting

template <typename Scalar>
using CVec = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using CMat = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// [[Re, -Im], [Im, Re]]
template <typename Scalar>
Mat<Scalar> lift_matrix(const CMat<Scalar>& M) {
  const Eigen::Index m = M.rows(), n = M.cols();
  Mat<Scalar> out(2 * m, 2 * n);
  out.topLeftCorner(m, n) = M.real();
  out.topRightCorner(m, n) = -M.imag();
  out.bottomLeftCorner(m, n) = M.imag();
  out.bottomRightCorner(m, n) = M.real();
  return out;
}

template <typename Scalar>
Vec<Scalar> lift_vector(const CVec<Scalar>& v) {
  Vec<Scalar> out(2 * v.size());
  out << v.real(), v.imag();
  return out;
}

/// Inverse of lift_vector for coefficient vectors: entry j pairs (j, n + j).
template <typename Scalar>
CVec<Scalar> unlift_vector(const Vec<Scalar>& v) {
  require(v.size() % 2 == 0, "unlift: length must be even");
  const Eigen::Index n = v.size() / 2;
  CVec<Scalar> out(n);
  for (Eigen::Index j = 0; j < n; ++j) out(j) = {v(j), v(n + j)};
  return out;
}

template <typename Scalar>
CMat<Scalar> unlift_matrix(const Mat<Scalar>& M) {
  require(M.rows() % 2 == 0 && M.cols() % 2 == 0, "unlift: dimensions must be even");
  const Eigen::Index m = M.rows() / 2, n = M.cols() / 2;
  CMat<Scalar> out(m, n);
  out.real() = M.topLeftCorner(m, n);
  out.imag() = M.bottomLeftCorner(m, n);
  return out;
}

template <typename Scalar>
struct LiftedSystem {
  ProblemInstance<Scalar> problem;
  AffineStructure<Scalar> structure;
  GroupMap groups;
};

/// Real-valued equivalent of a complex EIV system. Real unknowns are ordered
/// [Re x; Im x]; complex coefficient j maps to the group {j, n + j}. Each
/// complex matrix atom (with a real perturbation coefficient) becomes one
/// real atom of size 2m x 2n; each complex vector atom becomes [Re s; Im s].
template <typename Scalar>
LiftedSystem<Scalar> complex_to_real_lift(const CVec<Scalar>& y, const CMat<Scalar>& A,
                                          const std::vector<CMat<Scalar>>& matrix_atoms,
                                          const CMat<Scalar>& vector_atoms) {
  require(y.size() == A.rows(), "lift: y length must equal rows of A");
  require(vector_atoms.rows() == A.rows(), "lift: vector atoms must have m rows");
  const Eigen::Index m = A.rows(), n = A.cols();
  std::vector<SparseMat<Scalar>> atoms;
  atoms.reserve(matrix_atoms.size());
  for (const auto& S : matrix_atoms) {
    require(S.rows() == m && S.cols() == n, "lift: matrix atom must be m x n");
    require(S.allFinite(), "lift: atoms must be finite");
    atoms.push_back(lift_matrix<Scalar>(S).sparseView());
  }
  Mat<Scalar> Sy(2 * m, vector_atoms.cols());
  Sy.topRows(m) = vector_atoms.real();
  Sy.bottomRows(m) = vector_atoms.imag();
  require(Sy.allFinite(), "lift: atoms must be finite");

  std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) groups[static_cast<std::size_t>(j)] = {j, n + j};

  return LiftedSystem<Scalar>{ProblemInstance<Scalar>(lift_vector<Scalar>(y), lift_matrix<Scalar>(A)),
                              AffineStructure<Scalar>(2 * m, 2 * n, std::move(atoms), std::move(Sy)),
                              GroupMap(std::move(groups), 2 * n)};
}

}  // namespace stls
