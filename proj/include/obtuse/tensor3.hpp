#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "obtuse/errors.hpp"
#include "obtuse/obtuse_variable.hpp"
#include "obtuse/rng.hpp"

namespace obtuse {

// Real 3-tensor on R^n, stored flat. Entry (i,j,k) is the coefficient of
// x_k in the (i,j) slot of the matrix T(x):  (T(x))_{ij} = sum_k T(i,j,k) x_k.
template <typename Scalar>
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Eigen::Index dim)
      : dim_(dim), coeffs_(Eigen::VectorX<Scalar>::Zero(dim * dim * dim)) {}

  Eigen::Index dim() const { return dim_; }

  Scalar operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return coeffs_((i * dim_ + j) * dim_ + k);
  }
  Scalar& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return coeffs_((i * dim_ + j) * dim_ + k);
  }

  // The matrix T(x).
  Eigen::MatrixX<Scalar> contract(const Eigen::Ref<const Eigen::VectorX<Scalar>>& x) const {
    Eigen::MatrixX<Scalar> m(dim_, dim_);
    for (Eigen::Index i = 0; i < dim_; ++i)
      for (Eigen::Index j = 0; j < dim_; ++j) {
        Scalar acc = 0;
        for (Eigen::Index k = 0; k < dim_; ++k) acc += (*this)(i, j, k) * x(k);
        m(i, j) = acc;
      }
    return m;
  }

  Scalar max_abs() const {
    return coeffs_.size() > 0 ? coeffs_.cwiseAbs().maxCoeff() : Scalar(0);
  }

  const Eigen::VectorX<Scalar>& data() const { return coeffs_; }
  Eigen::VectorX<Scalar>& data() { return coeffs_; }

 private:
  Eigen::Index dim_ = 0;
  Eigen::VectorX<Scalar> coeffs_;
};

using Tensor3d = Tensor3<double>;

template <typename Scalar>
Scalar max_abs_diff(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

// Symmetry classification. `symmetry_residual` measures full symmetry of the
// index map (i,j,k) -> T(i,j,k); `sesqui_residual` the symmetry in (i,j,l,m)
// of  sum_k T(i,j,k) T(l,m,k) + w d_ij d_lm  with delta weight w (w = 1 for
// plain tensors, w = h after a sqrt(h) rescale); `doubly_residual` the same
// sum without the delta term.
template <typename Scalar>
struct TensorClassification {
  Scalar symmetry_residual = 0;
  Scalar sesqui_residual = 0;
  Scalar doubly_residual = 0;
  bool sesqui_symmetric = false;
  bool doubly_symmetric = false;
};

template <typename Scalar>
TensorClassification<Scalar> classify(const Tensor3<Scalar>& t, Scalar tol = Scalar(1e-10),
                                      Scalar delta_weight = Scalar(1)) {
  const Eigen::Index n = t.dim();
  TensorClassification<Scalar> c;

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        std::array<Eigen::Index, 3> s{i, j, k};
        std::sort(s.begin(), s.end());
        c.symmetry_residual = std::max(
            c.symmetry_residual, std::abs(t(i, j, k) - t(s[0], s[1], s[2])));
      }

  auto quad = [&](Eigen::Index i, Eigen::Index j, Eigen::Index l, Eigen::Index m,
                  Scalar w) {
    Scalar acc = 0;
    for (Eigen::Index k = 0; k < n; ++k) acc += t(i, j, k) * t(l, m, k);
    if (i == j && l == m) acc += w;
    return acc;
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index m = 0; m < n; ++m) {
          std::array<Eigen::Index, 4> s{i, j, l, m};
          std::sort(s.begin(), s.end());
          c.sesqui_residual =
              std::max(c.sesqui_residual,
                       std::abs(quad(i, j, l, m, delta_weight) -
                                quad(s[0], s[1], s[2], s[3], delta_weight)));
          c.doubly_residual = std::max(
              c.doubly_residual,
              std::abs(quad(i, j, l, m, Scalar(0)) - quad(s[0], s[1], s[2], s[3], Scalar(0))));
        }

  c.sesqui_symmetric = c.symmetry_residual <= tol && c.sesqui_residual <= tol;
  c.doubly_symmetric = c.symmetry_residual <= tol && c.doubly_residual <= tol;
  return c;
}

// Third-moment tensor of an obtuse variable: T(i,j,k) = sum_s p_s v_i v_j v_k.
// Entries are computed once per sorted index triple and copied to all
// permutations, so the stored tensor is exactly symmetric.
template <typename Scalar>
Tensor3<Scalar> tensor_of(const ObtuseVariable<Scalar>& x) {
  const Eigen::Index n = x.dim();
  Tensor3<Scalar> t(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      for (Eigen::Index k = j; k < n; ++k) {
        Scalar acc = 0;
        for (Eigen::Index s = 0; s < x.atoms(); ++s)
          acc += ((x.probs(s) * x.values(i, s)) * x.values(j, s)) * x.values(k, s);
        t(i, j, k) = acc;
        t(i, k, j) = acc;
        t(j, i, k) = acc;
        t(j, k, i) = acc;
        t(k, i, j) = acc;
        t(k, j, i) = acc;
      }
  return t;
}

// Max over the values v of |v v^T - I - T(v)|_max. Zero (up to rounding)
// exactly when T is the tensor of x.
template <typename Scalar>
Scalar structure_residual(const ObtuseVariable<Scalar>& x, const Tensor3<Scalar>& t) {
  const Eigen::Index n = x.dim();
  if (t.dim() != n) throw StructuralError("structure_residual: dimension mismatch");
  Scalar worst = 0;
  const auto id = Eigen::MatrixX<Scalar>::Identity(n, n);
  for (Eigen::Index s = 0; s < x.atoms(); ++s) {
    const auto v = x.values.col(s);
    worst = std::max(worst,
                     (v * v.transpose() - id - t.contract(v)).cwiseAbs().maxCoeff());
  }
  return worst;
}

// Entrywise multiplication by sqrt(h). The rescaled tensor satisfies the
// classification identity with delta weight h.
template <typename Scalar>
Tensor3<Scalar> rescale(const Tensor3<Scalar>& t, Scalar h) {
  if (!(h > 0)) throw StructuralError("rescale: h must be > 0");
  Tensor3<Scalar> out = t;
  out.data() *= std::sqrt(h);
  return out;
}

namespace detail {

// Lifted multiplication matrix M_i on the (n+1)-dimensional function space
// spanned by (1, X^1, .., X^n): entry (k, j) is the coefficient of basis k
// in X^i * basis_j, i.e. the tensor extended by T(i,j,0) = d_ij and
// T(i,0,k) = d_ik. Symmetric whenever T is index-symmetric.
template <typename Scalar>
Eigen::MatrixX<Scalar> lifted_mult_matrix(const Tensor3<Scalar>& t, Eigen::Index i) {
  const Eigen::Index n = t.dim();
  Eigen::MatrixX<Scalar> m = Eigen::MatrixX<Scalar>::Zero(n + 1, n + 1);
  m(0, i + 1) = Scalar(1);
  m(i + 1, 0) = Scalar(1);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) m(k + 1, j + 1) = t(i, j, k);
  return m;
}

}  // namespace detail

// Inverse of tensor_of: recovers the n+1 values and probabilities encoded by
// a sesqui-symmetric tensor. The n lifted multiplication matrices commute by
// sesqui-symmetry; a random probe combination is eigendecomposed and each
// value vector is read off the shared eigenvectors by Rayleigh quotients.
// Every recovered value is checked against the fixed-point identity
// v v^T = I + T(v) before the result is accepted.
template <typename Scalar>
ObtuseVariable<Scalar> system_of(const Tensor3<Scalar>& t, Scalar tol = Scalar(1e-8),
                                 std::uint64_t seed = 0x6f627475) {
  const Eigen::Index n = t.dim();
  if (n < 1) throw StructuralError("system_of: dimension must be >= 1");

  std::vector<Eigen::MatrixX<Scalar>> mult;
  mult.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) mult.push_back(detail::lifted_mult_matrix(t, i));

  const Scalar scale = Scalar(1) + t.max_abs();
  const Scalar commute_tol =
      std::max(tol, scale * scale * Scalar(64) * std::numeric_limits<Scalar>::epsilon());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar comm =
          (mult[i] * mult[j] - mult[j] * mult[i]).cwiseAbs().maxCoeff();
      if (comm > commute_tol) {
        std::ostringstream msg;
        msg << "system_of: multiplication matrices " << i << " and " << j
            << " do not commute (|[M_i,M_j]| = " << comm << ")";
        throw NotSesquiSymmetricError(msg.str());
      }
    }

  SubstreamRng rng(seed);
  const int max_probes = 8;
  Scalar worst_residual = std::numeric_limits<Scalar>::infinity();
  for (int probe = 0; probe < max_probes; ++probe) {
    Eigen::VectorX<Scalar> u(n);
    for (Eigen::Index i = 0; i < n; ++i) u(i) = static_cast<Scalar>(rng.normal());
    u.normalize();

    Eigen::MatrixX<Scalar> combo = Eigen::MatrixX<Scalar>::Zero(n + 1, n + 1);
    for (Eigen::Index i = 0; i < n; ++i) combo += u(i) * mult[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixX<Scalar>> es(combo);
    if (es.info() != Eigen::Success) continue;

    // Distinct eigenvalues separate the joint eigenvectors; retry otherwise.
    const auto& ev = es.eigenvalues();
    Scalar min_gap = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index s = 0; s + 1 <= n; ++s) min_gap = std::min(min_gap, ev(s + 1) - ev(s));
    if (min_gap < Scalar(1e-8) * (Scalar(1) + ev.cwiseAbs().maxCoeff())) continue;

    ObtuseVariable<Scalar> x;
    x.values.resize(n, n + 1);
    x.probs.resize(n + 1);
    for (Eigen::Index s = 0; s <= n; ++s) {
      const auto w = es.eigenvectors().col(s);
      for (Eigen::Index i = 0; i < n; ++i) x.values(i, s) = w.dot(mult[i] * w);
      x.probs(s) = Scalar(1) / (Scalar(1) + x.values.col(s).squaredNorm());
    }

    const Scalar res = structure_residual(x, t);
    worst_residual = std::min(worst_residual, res);
    const Scalar accept = std::max(tol, scale * Scalar(1e3) * std::numeric_limits<Scalar>::epsilon());
    if (res <= accept && std::abs(x.probs.sum() - Scalar(1)) <= accept) return x;
  }

  std::ostringstream msg;
  msg << "system_of: no probe produced a consistent value system (best fixed-point "
         "residual "
      << worst_residual << ")";
  throw NotSesquiSymmetricError(msg.str());
}

// Greedy nearest-neighbour matching between two families of column vectors.
// Returns the largest matched distance; infinity when the sizes differ.
template <typename Scalar>
Scalar match_value_sets(const Eigen::MatrixX<Scalar>& a, const Eigen::MatrixX<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    return std::numeric_limits<Scalar>::infinity();
  std::vector<bool> used(static_cast<std::size_t>(b.cols()), false);
  Scalar worst = 0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    Eigen::Index best_j = -1;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const Scalar d = (a.col(i) - b.col(j)).norm();
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    used[static_cast<std::size_t>(best_j)] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace obtuse
