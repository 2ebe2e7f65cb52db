#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <vector>

#include "obtuse/errors.hpp"
#include "obtuse/obtuse_variable.hpp"
#include "obtuse/tensor3.hpp"

namespace obtuse {

// Truncated chain of `sites` copies of an (n+1)-level system. Basis states
// are words over the letters {0..n} (0 = ground), encoded little-endian in
// base n+1: site 0 is the least significant digit. The encoding is fixed so
// serialized operators are reproducible bit for bit.
class ChainSpace {
 public:
  static constexpr std::int64_t kDefaultStateCap = std::int64_t(1) << 20;

  ChainSpace(int value_dim, int sites, std::int64_t state_cap = kDefaultStateCap)
      : n_(value_dim), sites_(sites) {
    if (value_dim < 1 || sites < 1)
      throw StructuralError("chain space: need value_dim >= 1 and sites >= 1");
    strides_.resize(static_cast<std::size_t>(sites) + 1);
    strides_[0] = 1;
    for (int k = 0; k < sites; ++k) {
      strides_[static_cast<std::size_t>(k) + 1] = strides_[static_cast<std::size_t>(k)] * (n_ + 1);
      if (strides_[static_cast<std::size_t>(k) + 1] > state_cap) {
        std::ostringstream msg;
        msg << "chain space: (n+1)^N = " << value_dim + 1 << "^" << sites
            << " exceeds the state cap " << state_cap;
        throw StructuralError(msg.str());
      }
    }
  }

  int value_dim() const { return n_; }   // n
  int levels() const { return n_ + 1; }  // letters per site
  int sites() const { return sites_; }
  std::int64_t dimension() const { return strides_[static_cast<std::size_t>(sites_)]; }

  int letter(std::int64_t word, int site) const {
    return static_cast<int>((word / strides_[static_cast<std::size_t>(site)]) % (n_ + 1));
  }
  std::int64_t replace_letter(std::int64_t word, int site, int to) const {
    const std::int64_t stride = strides_[static_cast<std::size_t>(site)];
    return word + (to - letter(word, site)) * stride;
  }
  std::int64_t vacuum() const { return 0; }

  bool operator==(const ChainSpace& other) const {
    return n_ == other.n_ && sites_ == other.sites_;
  }

 private:
  int n_;
  int sites_;
  std::vector<std::int64_t> strides_;
};

// Sparse linear operator on a chain space.
template <typename Scalar>
struct ChainOperator {
  ChainSpace space;
  Eigen::SparseMatrix<Scalar> matrix;

  Eigen::VectorX<Scalar> apply(const Eigen::VectorX<Scalar>& state) const {
    return matrix * state;
  }
  ChainOperator adjoint() const { return {space, matrix.transpose()}; }
  bool is_hermitian(Scalar tol = Scalar(0)) const {
    const Eigen::SparseMatrix<Scalar> d = matrix - Eigen::SparseMatrix<Scalar>(matrix.transpose());
    Scalar worst = 0;
    for (int k = 0; k < d.outerSize(); ++k)
      for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(d, k); it; ++it)
        worst = std::max(worst, std::abs(it.value()));
    return worst <= tol;
  }
};

using ChainOperatord = ChainOperator<double>;

template <typename Scalar>
Scalar max_abs_diff(const ChainOperator<Scalar>& a, const ChainOperator<Scalar>& b) {
  const Eigen::SparseMatrix<Scalar> d = a.matrix - b.matrix;
  Scalar worst = 0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(d, k); it; ++it)
      worst = std::max(worst, std::abs(it.value()));
  return worst;
}

// The elementary transition a^{from}_{to}(site): maps a word whose letter at
// `site` is `from` to the same word with letter `to`, and annihilates every
// other word. Exactly (n+1)^(N-1) nonzero entries.
template <typename Scalar = double>
ChainOperator<Scalar> site_op(const ChainSpace& space, int from, int to, int site) {
  if (from < 0 || from > space.value_dim() || to < 0 || to > space.value_dim())
    throw StructuralError("site_op: level out of range");
  if (site < 0 || site >= space.sites()) throw StructuralError("site_op: site out of range");

  std::vector<Eigen::Triplet<Scalar>> trip;
  trip.reserve(static_cast<std::size_t>(space.dimension() / space.levels()));
  for (std::int64_t w = 0; w < space.dimension(); ++w)
    if (space.letter(w, site) == from)
      trip.emplace_back(static_cast<int>(space.replace_letter(w, site, to)),
                        static_cast<int>(w), Scalar(1));
  ChainOperator<Scalar> op{space, Eigen::SparseMatrix<Scalar>(
                                      static_cast<int>(space.dimension()),
                                      static_cast<int>(space.dimension()))};
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  return op;
}

// Multiplication operators by the n walk coordinates at one site:
//   M_i = a^0_i + a^i_0 + sum_{j,l} T(j,l,i) a^j_l .
// Each operator is Hermitian and any two of them commute.
template <typename Scalar>
std::vector<ChainOperator<Scalar>> mult_ops(const ChainSpace& space, const Tensor3<Scalar>& t,
                                            int site) {
  const int n = space.value_dim();
  if (t.dim() != n) throw StructuralError("mult_ops: tensor dimension mismatch");
  if (site < 0 || site >= space.sites()) throw StructuralError("mult_ops: site out of range");

  std::vector<ChainOperator<Scalar>> ops;
  ops.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::Triplet<Scalar>> trip;
    for (std::int64_t w = 0; w < space.dimension(); ++w) {
      const int m = space.letter(w, site);
      if (m == 0) {
        trip.emplace_back(static_cast<int>(space.replace_letter(w, site, i + 1)),
                          static_cast<int>(w), Scalar(1));
        continue;
      }
      if (m == i + 1)
        trip.emplace_back(static_cast<int>(space.replace_letter(w, site, 0)),
                          static_cast<int>(w), Scalar(1));
      for (int l = 0; l < n; ++l) {
        const Scalar c = t(m - 1, l, i);
        if (c == Scalar(0)) continue;
        trip.emplace_back(static_cast<int>(space.replace_letter(w, site, l + 1)),
                          static_cast<int>(w), c);
      }
    }
    ChainOperator<Scalar> op{space, Eigen::SparseMatrix<Scalar>(
                                        static_cast<int>(space.dimension()),
                                        static_cast<int>(space.dimension()))};
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    ops.push_back(std::move(op));
  }
  return ops;
}

// Expansion of the classical product X_i(site) * X_word in the word basis,
// written out term by term:
//   - site in the ground state: the word with letter i created there;
//   - letter i already present: the word with it removed (coefficient 1);
//   - any letter j present: exchange terms with coefficients T(i,j,l).
// Must reproduce column `word` of mult_ops exactly.
template <typename Scalar>
Eigen::VectorX<Scalar> pointwise_mult_oracle(const ChainSpace& space,
                                             const ObtuseVariable<Scalar>& x, int coordinate,
                                             int site, std::int64_t word) {
  const int n = space.value_dim();
  if (x.dim() != n) throw StructuralError("pointwise_mult_oracle: dimension mismatch");
  const Tensor3<Scalar> t = tensor_of(x);

  Eigen::VectorX<Scalar> out = Eigen::VectorX<Scalar>::Zero(space.dimension());
  const int m = space.letter(word, site);
  if (m == 0) {
    out(space.replace_letter(word, site, coordinate + 1)) += Scalar(1);
    return out;
  }
  if (m == coordinate + 1) out(space.replace_letter(word, site, 0)) += Scalar(1);
  for (int l = 0; l < n; ++l)
    out(space.replace_letter(word, site, l + 1)) += t(coordinate, m - 1, l);
  return out;
}

// <vacuum, M^k vacuum>; for a multiplication operator this is the k-th
// moment of the corresponding walk coordinate.
template <typename Scalar>
Scalar vacuum_moment(const ChainOperator<Scalar>& op, int power, int power_cap = 64) {
  if (power < 0 || power > power_cap)
    throw StructuralError("vacuum_moment: power outside the configured cap");
  Eigen::VectorX<Scalar> state = Eigen::VectorX<Scalar>::Zero(op.space.dimension());
  state(op.space.vacuum()) = Scalar(1);
  for (int k = 0; k < power; ++k) state = op.matrix * state;
  return state(op.space.vacuum());
}

// Single-step characteristic function computed on the operator side: the
// (vacuum, vacuum) entry of exp(iL) for the one-site (n+1)x(n+1) matrix
//   L = sqrt(h) * sum_i alpha_i [ a^0_i + a^i_0 + sum_{j,l} T(j,l,i) a^j_l ].
// Equals the probability-side value  sum_s p_s exp(i sqrt(h) <alpha, v_s>).
template <typename Scalar>
std::complex<Scalar> local_cf(const ObtuseVariable<Scalar>& x, const Tensor3<Scalar>& t,
                              const Eigen::VectorX<Scalar>& alpha, Scalar h) {
  const Eigen::Index n = x.dim();
  if (alpha.size() != n || t.dim() != n) throw StructuralError("local_cf: dimension mismatch");
  if (!(h > 0)) throw StructuralError("local_cf: h must be > 0");

  Eigen::MatrixX<Scalar> gen = Eigen::MatrixX<Scalar>::Zero(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    gen(i + 1, 0) += alpha(i);  // creation a^0_i
    gen(0, i + 1) += alpha(i);  // annihilation a^i_0
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index l = 0; l < n; ++l) gen(l + 1, j + 1) += alpha(i) * t(j, l, i);
  }
  gen *= std::sqrt(h);

  // Exact unitary exponential through the eigendecomposition of the real
  // symmetric generator.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixX<Scalar>> es(gen);
  std::complex<Scalar> value(0, 0);
  for (Eigen::Index m = 0; m <= n; ++m) {
    const Scalar weight = es.eigenvectors()(0, m) * es.eigenvectors()(0, m);
    value += weight * std::exp(std::complex<Scalar>(0, es.eigenvalues()(m)));
  }
  return value;
}

// floor(t/h) with a relative snap: decimal step sizes are not exactly
// representable in binary, so t/h can land an ulp below an integer.
template <typename Scalar>
std::int64_t num_steps(Scalar t, Scalar h) {
  if (!(h > 0)) throw StructuralError("num_steps: h must be > 0");
  if (t < 0) throw StructuralError("num_steps: t must be >= 0");
  const Scalar q = t / h;
  Scalar fl = std::floor(q);
  if (q - fl > Scalar(1) - (Scalar(1e-12) * q + Scalar(1e-12))) fl += Scalar(1);
  return static_cast<std::int64_t>(fl);
}

// z^k through the log domain, guarding against underflow of |z|^k.
template <typename Scalar>
std::complex<Scalar> cpow_int(std::complex<Scalar> z, std::int64_t k) {
  if (k == 0) return {Scalar(1), Scalar(0)};
  const Scalar mod = std::abs(z);
  if (mod == Scalar(0)) return {Scalar(0), Scalar(0)};
  const Scalar kk = static_cast<Scalar>(k);
  return std::exp(std::complex<Scalar>(kk * std::log(mod), kk * std::arg(z)));
}

// Characteristic function of the rescaled walk at horizon t, computed as the
// floor(t/h)-th power of the single-step operator-side value.
template <typename Scalar>
std::complex<Scalar> operator_cf(const ObtuseVariable<Scalar>& x, const Tensor3<Scalar>& t3,
                                 const Eigen::VectorX<Scalar>& alpha, Scalar h, Scalar t) {
  return cpow_int(local_cf(x, t3, alpha, h), num_steps(t, h));
}

// Textual sparse dump: header "chain n N", then one "row col value" line per
// entry in column-major order.
template <typename Scalar>
void dump_operator(std::ostream& os, const ChainOperator<Scalar>& op) {
  os << "chain " << op.space.value_dim() << " " << op.space.sites() << "\n";
  char buf[64];
  for (int k = 0; k < op.matrix.outerSize(); ++k)
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(op.matrix, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld %lld %.17g", static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), static_cast<double>(it.value()));
      os << buf << "\n";
    }
}

}  // namespace obtuse
