#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "obtuse/errors.hpp"
#include "obtuse/rng.hpp"
#include "obtuse/tensor3.hpp"

namespace obtuse {

// Eigen-structure of a doubly symmetric 3-tensor A: an orthonormal basis
// e^1..e^n with A e^m = lambda_m e^m (x) e^m, the jump set
// { lambda_m e^m : lambda_m != 0 } (as matrix columns), and the orthogonal
// projector onto the complement of the jump directions.
template <typename Scalar>
struct OrthogonalFamily {
  Eigen::MatrixX<Scalar> basis;        // n x n, column m = e^m
  Eigen::VectorX<Scalar> eigenvalues;  // n
  Eigen::MatrixX<Scalar> jumps;        // n x (#nonzero eigenvalues)
  Eigen::MatrixX<Scalar> projector;    // n x n
};

using OrthogonalFamilyd = OrthogonalFamily<double>;

// Inverse of diagonalize: A(i,j,k) = sum_x x_i x_j x_k / |x|^2 over the jump
// set. An empty jump set gives the zero tensor.
template <typename Scalar>
Tensor3<Scalar> reconstruct(const OrthogonalFamily<Scalar>& fam) {
  const Eigen::Index n = fam.projector.rows();
  Tensor3<Scalar> a(n);
  for (Eigen::Index c = 0; c < fam.jumps.cols(); ++c) {
    const auto x = fam.jumps.col(c);
    const Scalar inv = Scalar(1) / x.squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) a(i, j, k) += inv * x(i) * x(j) * x(k);
  }
  return a;
}

// Diagonalizes a doubly symmetric tensor. The symmetric matrix A(u) for a
// random probe u has the family vectors as eigenvectors with eigenvalues
// lambda_m <e^m, u>; each candidate basis vector is accepted only if the
// rank-one identity A(e) = lambda e e^T holds, and fresh probes are drawn
// (up to 8) when a degenerate probe mixes eigenspaces.
template <typename Scalar>
OrthogonalFamily<Scalar> diagonalize(const Tensor3<Scalar>& a,
                                     std::uint64_t seed = 0x64696167,
                                     Scalar tol = Scalar(1e-10)) {
  const Eigen::Index n = a.dim();
  if (n < 1) throw StructuralError("diagonalize: dimension must be >= 1");

  const Scalar scale = a.max_abs();
  const Scalar accept = std::max(
      tol, (Scalar(1) + scale) * Scalar(256) * std::numeric_limits<Scalar>::epsilon());

  SubstreamRng rng(seed);
  const int max_probes = 8;
  Scalar best_worst = std::numeric_limits<Scalar>::infinity();
  for (int probe = 0; probe < max_probes; ++probe) {
    Eigen::VectorX<Scalar> u(n);
    for (Eigen::Index i = 0; i < n; ++i) u(i) = static_cast<Scalar>(rng.normal());
    u.normalize();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixX<Scalar>> es(a.contract(u));
    if (es.info() != Eigen::Success) continue;

    OrthogonalFamily<Scalar> fam;
    fam.basis = es.eigenvectors();
    fam.eigenvalues.resize(n);
    Scalar worst = 0;
    for (Eigen::Index m = 0; m < n; ++m) {
      const Eigen::VectorX<Scalar> e = fam.basis.col(m);
      const Eigen::MatrixX<Scalar> ae = a.contract(e);
      const Scalar lambda = e.dot(ae * e);
      fam.eigenvalues(m) = lambda;
      worst = std::max(worst, (ae - lambda * e * e.transpose()).cwiseAbs().maxCoeff());
    }
    best_worst = std::min(best_worst, worst);
    if (worst > accept) continue;

    const Scalar jump_cut = std::max(tol, Scalar(1e-8) * scale);
    Eigen::Index count = 0;
    for (Eigen::Index m = 0; m < n; ++m)
      if (std::abs(fam.eigenvalues(m)) > jump_cut) ++count;
    fam.jumps.resize(n, count);
    fam.projector = Eigen::MatrixX<Scalar>::Identity(n, n);
    Eigen::Index c = 0;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (std::abs(fam.eigenvalues(m)) <= jump_cut) continue;
      fam.jumps.col(c++) = fam.eigenvalues(m) * fam.basis.col(m);
      fam.projector -= fam.basis.col(m) * fam.basis.col(m).transpose();
    }
    // A probe nearly orthogonal to a jump direction can hide that jump in
    // the numerical kernel; the round trip exposes it.
    if (max_abs_diff(reconstruct(fam), a) > accept) continue;
    return fam;
  }

  std::ostringstream msg;
  msg << "diagonalize: no probe separated the spectrum after " << max_probes
      << " attempts (best rank-one residual " << best_worst
      << "); the tensor is degenerate or not doubly symmetric";
  throw DegenerateTensorError(msg.str());
}

}  // namespace obtuse
