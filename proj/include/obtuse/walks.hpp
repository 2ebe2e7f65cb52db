#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <ostream>
#include <thread>
#include <vector>

#include "obtuse/chain.hpp"
#include "obtuse/errors.hpp"
#include "obtuse/obtuse_variable.hpp"
#include "obtuse/rng.hpp"
#include "obtuse/tensor3.hpp"

namespace obtuse {

// A rescaled walk: steps sqrt(h) * v_s over horizon t, taking floor(t/h)
// steps.
template <typename Scalar>
struct WalkScenario {
  ObtuseVariable<Scalar> variable;
  Scalar h;
  Scalar t;

  WalkScenario(ObtuseVariable<Scalar> x, Scalar step, Scalar horizon)
      : variable(std::move(x)), h(step), t(horizon) {
    if (!(h > 0)) throw StructuralError("walk scenario: h must be > 0");
    if (!(t >= 0)) throw StructuralError("walk scenario: t must be >= 0");
  }

  std::int64_t steps() const { return num_steps(t, h); }
};

using WalkScenariod = WalkScenario<double>;

template <typename Scalar>
struct Trajectory {
  Eigen::VectorX<Scalar> times;
  Eigen::MatrixX<Scalar> positions;  // dim x times.size(), column per time
};

using Trajectoryd = Trajectory<double>;

namespace detail {

// Inverse-CDF atom index for one uniform draw; cumulative order follows the
// input probability order.
template <typename Scalar>
Eigen::Index pick_atom(const Eigen::VectorX<Scalar>& probs, double u) {
  Scalar cum = 0;
  for (Eigen::Index s = 0; s + 1 < probs.size(); ++s) {
    cum += probs(s);
    if (static_cast<Scalar>(u) < cum) return s;
  }
  return probs.size() - 1;
}

// Runs `body(begin, end)` over [0, count) split across `threads` chunks.
// Bodies write to disjoint output columns, so no synchronization is needed
// and the result is independent of the chunking.
inline void parallel_ranges(std::int64_t count, int threads,
                            const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (threads <= 1 || count < 2 * threads) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  const std::int64_t chunk = (count + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(body, begin, end);
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// One full trajectory: positions at times 0, h, 2h, ..., steps*h. Stream
// `stream` of the master seed drives the draws, so trajectory k is the same
// whether sampled alone or as part of a batch.
template <typename Scalar>
Trajectory<Scalar> sample_walk(const WalkScenario<Scalar>& sc, std::uint64_t seed,
                               std::uint64_t stream = 0) {
  const Eigen::Index n = sc.variable.dim();
  const std::int64_t steps = sc.steps();
  const Scalar root_h = std::sqrt(sc.h);

  Trajectory<Scalar> traj;
  traj.times.resize(steps + 1);
  traj.positions = Eigen::MatrixX<Scalar>::Zero(n, steps + 1);
  SubstreamRng rng(seed, stream);
  Eigen::VectorX<Scalar> pos = Eigen::VectorX<Scalar>::Zero(n);
  traj.times(0) = 0;
  for (std::int64_t k = 1; k <= steps; ++k) {
    const Eigen::Index s = detail::pick_atom(sc.variable.probs, rng.uniform());
    pos += root_h * sc.variable.values.col(s);
    traj.times(k) = static_cast<Scalar>(k) * sc.h;
    traj.positions.col(k) = pos;
  }
  return traj;
}

// Final positions of `paths` independent trajectories, one column per path.
// Path k always uses substream k; the thread count only changes how the
// columns are filled in, never their contents.
template <typename Scalar>
Eigen::MatrixX<Scalar> sample_walk_finals(const WalkScenario<Scalar>& sc, std::int64_t paths,
                                          std::uint64_t seed, int threads = 1) {
  const Eigen::Index n = sc.variable.dim();
  const std::int64_t steps = sc.steps();
  const Scalar root_h = std::sqrt(sc.h);
  Eigen::MatrixX<Scalar> finals(n, paths);

  const Eigen::MatrixX<Scalar> scaled = root_h * sc.variable.values;
  detail::parallel_ranges(paths, threads, [&](std::int64_t begin, std::int64_t end) {
    Eigen::VectorX<Scalar> pos(n);
    for (std::int64_t p = begin; p < end; ++p) {
      SubstreamRng rng(seed, static_cast<std::uint64_t>(p));
      pos.setZero();
      for (std::int64_t k = 0; k < steps; ++k)
        pos += scaled.col(detail::pick_atom(sc.variable.probs, rng.uniform()));
      finals.col(p) = pos;
    }
  });
  return finals;
}

// Exact characteristic function of the rescaled walk:
//   ( sum_s p_s exp(i sqrt(h) <alpha, v_s>) ) ^ floor(t/h).
template <typename Scalar>
std::complex<Scalar> exact_discrete_cf(const WalkScenario<Scalar>& sc,
                                       const Eigen::VectorX<Scalar>& alpha) {
  if (alpha.size() != sc.variable.dim())
    throw StructuralError("exact_discrete_cf: alpha dimension mismatch");
  const Scalar root_h = std::sqrt(sc.h);
  std::complex<Scalar> step(0, 0);
  for (Eigen::Index s = 0; s < sc.variable.atoms(); ++s)
    step += sc.variable.probs(s) *
            std::exp(std::complex<Scalar>(0, root_h * alpha.dot(sc.variable.values.col(s))));
  return cpow_int(step, sc.steps());
}

template <typename Scalar>
struct EmpiricalCf {
  std::complex<Scalar> value;
  Scalar std_error;
};

// Monte Carlo characteristic function over final positions (one column per
// path). Standard error is the sample standard deviation of exp(i<alpha,X>)
// over sqrt(paths).
template <typename Scalar>
EmpiricalCf<Scalar> empirical_cf(const Eigen::MatrixX<Scalar>& finals,
                                 const Eigen::VectorX<Scalar>& alpha) {
  const Eigen::Index paths = finals.cols();
  if (paths < 1) throw StructuralError("empirical_cf: need at least one path");
  std::complex<Scalar> sum(0, 0);
  for (Eigen::Index p = 0; p < paths; ++p)
    sum += std::exp(std::complex<Scalar>(0, alpha.dot(finals.col(p))));
  const std::complex<Scalar> mean = sum / static_cast<Scalar>(paths);

  Scalar var = 0;
  if (paths > 1) {
    for (Eigen::Index p = 0; p < paths; ++p) {
      const std::complex<Scalar> d =
          std::exp(std::complex<Scalar>(0, alpha.dot(finals.col(p)))) - mean;
      var += std::norm(d);
    }
    var /= static_cast<Scalar>(paths - 1);
  }
  return {mean, std::sqrt(var / static_cast<Scalar>(paths))};
}

// CSV rows (alpha_1, .., alpha_n, re_cf, im_cf, stderr), one per probe
// vector, in the probe order given.
template <typename Scalar>
void write_empirical_cf_csv(std::ostream& os,
                            const std::vector<Eigen::VectorX<Scalar>>& alphas,
                            const std::vector<EmpiricalCf<Scalar>>& cfs) {
  if (alphas.size() != cfs.size())
    throw StructuralError("write_empirical_cf_csv: alphas/cfs length mismatch");
  if (alphas.empty()) return;
  char buf[40];
  auto put = [&](Scalar v) {
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
    os << buf;
  };
  for (Eigen::Index i = 1; i <= alphas.front().size(); ++i)
    os << "alpha_" << i << ",";
  os << "re_cf,im_cf,stderr\n";
  for (std::size_t r = 0; r < alphas.size(); ++r) {
    for (Eigen::Index i = 0; i < alphas[r].size(); ++i) {
      put(alphas[r](i));
      os << ",";
    }
    put(cfs[r].value.real());
    os << ",";
    put(cfs[r].value.imag());
    os << ",";
    put(cfs[r].std_error);
    os << "\n";
  }
}

// Max over the scaled values w = sqrt(h) v of |w w^T - h I - T~(w)|_max with
// T~ the sqrt(h)-rescaled tensor of x. Algebraically zero for every h.
template <typename Scalar>
Scalar discrete_structure_residual(const ObtuseVariable<Scalar>& x, Scalar h) {
  const Eigen::Index n = x.dim();
  const Tensor3<Scalar> scaled = rescale(tensor_of(x), h);
  const Scalar root_h = std::sqrt(h);
  Scalar worst = 0;
  const auto id = Eigen::MatrixX<Scalar>::Identity(n, n);
  for (Eigen::Index s = 0; s < x.atoms(); ++s) {
    const Eigen::VectorX<Scalar> w = root_h * x.values.col(s);
    worst = std::max(worst,
                     (w * w.transpose() - h * id - scaled.contract(w)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace obtuse
