#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "obtuse/errors.hpp"
#include "obtuse/rng.hpp"

namespace obtuse {

// A centered, identity-covariance random variable in R^n taking exactly
// n+1 values. Column s of `values` is the value v_s, `probs(s)` its weight.
// Equivalent characterizations (all checked by validate):
//   i)   sum_s p_s v_s = 0 and sum_s p_s v_s v_s^T = I
//   ii)  the (n+1)x(n+1) matrix with rows sqrt(p_s) * (1, v_s) is orthogonal
//   iii) the matrix with columns sqrt(p_s) * (1, v_s) is orthogonal
//   iv)  <v_i, v_j> = -1 for i != j and p_s = 1/(1+|v_s|^2)
template <typename Scalar>
struct ObtuseVariable {
  Eigen::MatrixX<Scalar> values;  // n x (n+1)
  Eigen::VectorX<Scalar> probs;   // n+1

  Eigen::Index dim() const { return values.rows(); }
  Eigen::Index atoms() const { return probs.size(); }
};

using ObtuseVariabled = ObtuseVariable<double>;

// Orthogonal matrix whose first row is sqrt(p_s) * the hatted value
// (1, v_s) of atom s in column s.
template <typename Scalar>
struct UnitaryEmbedding {
  Eigen::MatrixX<Scalar> matrix;  // (n+1) x (n+1)

  Scalar orthogonality_residual() const {
    const auto n = matrix.rows();
    return (matrix.transpose() * matrix - Eigen::MatrixX<Scalar>::Identity(n, n))
        .cwiseAbs()
        .maxCoeff();
  }
};

// Per-condition residuals of the four equivalent characterizations above.
template <typename Scalar>
struct ValidationReport {
  Scalar mean_residual = 0;          // |sum p_s v_s|_max
  Scalar covariance_residual = 0;    // |sum p_s v_s v_s^T - I|_max
  Scalar prob_sum_residual = 0;      // |sum p_s - 1|
  Scalar row_unitary_residual = 0;   // condition ii
  Scalar col_unitary_residual = 0;   // condition iii
  Scalar obtuse_residual = 0;        // max_{i!=j} |<v_i,v_j> + 1|
  Scalar prob_formula_residual = 0;  // max_s |p_s - 1/(1+|v_s|^2)|
  bool probs_positive = true;

  Scalar max_residual() const {
    return std::max({mean_residual, covariance_residual, prob_sum_residual,
                     row_unitary_residual, col_unitary_residual, obtuse_residual,
                     prob_formula_residual});
  }
  bool pass(Scalar tol) const { return probs_positive && max_residual() <= tol; }
};

namespace detail {

// Orthogonal (n+1)x(n+1) matrix whose first row is the unit vector w, built
// from the single reflection mapping e_0 to -w, then negated. Using the
// mirror vector e_0 + w keeps the construction well conditioned for every
// probability vector (all entries of w are positive). Deterministic in w.
template <typename Scalar>
Eigen::MatrixX<Scalar> orthogonal_with_first_row(const Eigen::VectorX<Scalar>& w) {
  const Eigen::Index m = w.size();
  const Eigen::VectorX<Scalar> u = Eigen::VectorX<Scalar>::Unit(m, 0) + w;
  Eigen::MatrixX<Scalar> h = -Eigen::MatrixX<Scalar>::Identity(m, m);
  h.noalias() += (Scalar(2) / u.squaredNorm()) * (u * u.transpose());
  return h;
}

// Haar-like random rotation from the QR of a Gaussian matrix, sign-fixed so
// the factorization is unique.
template <typename Scalar>
Eigen::MatrixX<Scalar> random_rotation(Eigen::Index n, SubstreamRng& rng) {
  Eigen::MatrixX<Scalar> g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = static_cast<Scalar>(rng.normal());
  Eigen::HouseholderQR<Eigen::MatrixX<Scalar>> qr(g);
  Eigen::MatrixX<Scalar> q = qr.householderQ();
  const Eigen::MatrixX<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace detail

template <typename Scalar>
ValidationReport<Scalar> validate(const ObtuseVariable<Scalar>& x,
                                  Scalar tol = Scalar(1e-10)) {
  (void)tol;  // residuals are reported; callers compare against tol via pass()
  const Eigen::Index n = x.dim();
  if (n < 1) throw StructuralError("obtuse variable: dimension must be >= 1");
  if (x.values.cols() != n + 1)
    throw StructuralError("obtuse variable: expected n+1 value vectors");
  if (x.probs.size() != x.values.cols())
    throw StructuralError("obtuse variable: values/probs length mismatch");

  ValidationReport<Scalar> rep;
  rep.probs_positive = (x.probs.array() > Scalar(0)).all();
  rep.prob_sum_residual = std::abs(x.probs.sum() - Scalar(1));
  rep.mean_residual = (x.values * x.probs).cwiseAbs().maxCoeff();
  rep.covariance_residual =
      (x.values * x.probs.asDiagonal() * x.values.transpose() -
       Eigen::MatrixX<Scalar>::Identity(n, n))
          .cwiseAbs()
          .maxCoeff();

  Eigen::MatrixX<Scalar> hat(n + 1, n + 1);  // column s = sqrt(p_s) (1, v_s)
  for (Eigen::Index s = 0; s <= n; ++s) {
    const Scalar w = std::sqrt(std::max(x.probs(s), Scalar(0)));
    hat(0, s) = w;
    hat.block(1, s, n, 1) = w * x.values.col(s);
  }
  const auto id = Eigen::MatrixX<Scalar>::Identity(n + 1, n + 1);
  rep.col_unitary_residual = (hat.transpose() * hat - id).cwiseAbs().maxCoeff();
  rep.row_unitary_residual = (hat * hat.transpose() - id).cwiseAbs().maxCoeff();

  rep.obtuse_residual = 0;
  rep.prob_formula_residual = 0;
  for (Eigen::Index s = 0; s <= n; ++s) {
    for (Eigen::Index r = s + 1; r <= n; ++r)
      rep.obtuse_residual =
          std::max(rep.obtuse_residual,
                   std::abs(x.values.col(s).dot(x.values.col(r)) + Scalar(1)));
    rep.prob_formula_residual =
        std::max(rep.prob_formula_residual,
                 std::abs(x.probs(s) -
                          Scalar(1) / (Scalar(1) + x.values.col(s).squaredNorm())));
  }
  return rep;
}

// Builds an obtuse variable carrying the given probabilities by completing
// the sqrt-probability vector to an orthogonal matrix. The completion is a
// single deterministic reflection; when a seed is given the remaining n
// coordinates are additionally rotated by a seeded random rotation.
template <typename Scalar>
ObtuseVariable<Scalar> from_probabilities(
    const Eigen::VectorX<Scalar>& alphas,
    std::optional<std::uint64_t> seed = std::nullopt, Scalar sum_tol = Scalar(1e-9)) {
  const Eigen::Index m = alphas.size();
  if (m < 2) throw InvalidDistributionError("from_probabilities: need at least 2 atoms");
  if (!(alphas.array() > Scalar(0)).all())
    throw InvalidDistributionError("from_probabilities: probabilities must be > 0");
  if (std::abs(alphas.sum() - Scalar(1)) > sum_tol) {
    std::ostringstream msg;
    msg << "from_probabilities: probabilities sum to " << alphas.sum() << ", not 1";
    throw InvalidDistributionError(msg.str());
  }

  const Eigen::Index n = m - 1;
  const Eigen::VectorX<Scalar> w = alphas.cwiseSqrt();
  Eigen::MatrixX<Scalar> embed = detail::orthogonal_with_first_row(w);
  if (seed) {
    SubstreamRng rng(*seed);
    embed.bottomRows(n) = detail::random_rotation<Scalar>(n, rng) * embed.bottomRows(n);
  }

  ObtuseVariable<Scalar> x;
  x.probs = alphas;
  x.values.resize(n, m);
  for (Eigen::Index s = 0; s < m; ++s) x.values.col(s) = embed.col(s).tail(n) / embed(0, s);
  return x;
}

// The 2-dimensional three-point family v_1=(a,0), v_2=(b,c), v_3=(b,d) with
// a = sqrt(1/p-1), b = -1/a, c = sqrt(1/q-1-b^2), d = -sqrt(1/r-1-b^2).
// Parameters making a radicand vanish are rejected: the variable would take
// fewer than three distinct values.
template <typename Scalar>
ObtuseVariable<Scalar> from_planar_chain(Scalar p, Scalar q, Scalar r,
                                         Scalar sum_tol = Scalar(1e-9)) {
  if (!(p > 0 && q > 0 && r > 0))
    throw InvalidDistributionError("from_planar_chain: p, q, r must be > 0");
  if (std::abs(p + q + r - Scalar(1)) > sum_tol)
    throw InvalidDistributionError("from_planar_chain: p + q + r must equal 1");

  // Feasibility is checked on the defining formulas, so inputs that make a
  // radicand vanish (the variable would then take fewer than three values)
  // are rejected exactly as written.
  const Scalar a2_direct = Scalar(1) / p - Scalar(1);
  if (!(a2_direct > 0)) throw InfeasibleParametersError("from_planar_chain: 1/p - 1 <= 0");
  const Scalar b2_direct = Scalar(1) / a2_direct;
  if (!(Scalar(1) / q - Scalar(1) - b2_direct > 0))
    throw InfeasibleParametersError("from_planar_chain: 1/q - 1 - b^2 <= 0");
  if (!(Scalar(1) / r - Scalar(1) - b2_direct > 0))
    throw InfeasibleParametersError("from_planar_chain: 1/r - 1 - b^2 <= 0");

  // The values themselves use the cancellation-free rearrangements
  //   a^2 = (q+r)/p,  b^2 = p/(q+r),  c^2 = r/(q(q+r)),  d^2 = q/(r(q+r)),
  // which agree with the defining formulas on the simplex but stay accurate
  // when p approaches 1 (1/p - 1 would cancel catastrophically).
  const Scalar qr = q + r;
  ObtuseVariable<Scalar> x;
  x.values.resize(2, 3);
  x.values << std::sqrt(qr / p), -std::sqrt(p / qr), -std::sqrt(p / qr), Scalar(0),
      std::sqrt(r / (q * qr)), -std::sqrt(q / (r * qr));
  x.probs.resize(3);
  x.probs << p, q, r;
  return x;
}

// Column s is sqrt(p_s) * (1, v_s). Precondition: x passes validate.
template <typename Scalar>
UnitaryEmbedding<Scalar> unitary_embedding(const ObtuseVariable<Scalar>& x) {
  const Eigen::Index n = x.dim();
  UnitaryEmbedding<Scalar> u;
  u.matrix.resize(n + 1, n + 1);
  for (Eigen::Index s = 0; s <= n; ++s) {
    const Scalar w = std::sqrt(x.probs(s));
    u.matrix(0, s) = w;
    u.matrix.block(1, s, n, 1) = w * x.values.col(s);
  }
  return u;
}

}  // namespace obtuse
