#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <sstream>
#include <span>
#include <vector>

#include "obtuse/errors.hpp"
#include "obtuse/family.hpp"
#include "obtuse/orthogonal_family.hpp"
#include "obtuse/tensor3.hpp"
#include "obtuse/walks.hpp"

namespace obtuse {

// The limit process of a rescaled walk: Brownian motion on the range of the
// projector plus independent compensated Poisson jumps along the columns of
// `jumps`, jump x arriving with intensity 1/|x|^2.
template <typename Scalar>
struct LimitSpec {
  Eigen::Index dim = 0;
  Eigen::MatrixX<Scalar> projector;
  Eigen::MatrixX<Scalar> jumps;
  Eigen::VectorX<Scalar> intensities;
};

using LimitSpecd = LimitSpec<double>;

// The default tolerance matches the accuracy contract of h_limit_tensor:
// extrapolated limit tensors are diagonalizable only up to their
// extrapolation error, not to machine precision.
template <typename Scalar>
LimitSpec<Scalar> limit_from_tensor(const Tensor3<Scalar>& s,
                                    std::uint64_t seed = 0x64696167,
                                    Scalar tol = Scalar(1e-6)) {
  const OrthogonalFamily<Scalar> fam = diagonalize(s, seed, tol);
  LimitSpec<Scalar> spec;
  spec.dim = s.dim();
  spec.projector = fam.projector;
  spec.jumps = fam.jumps;
  spec.intensities.resize(fam.jumps.cols());
  for (Eigen::Index c = 0; c < fam.jumps.cols(); ++c)
    spec.intensities(c) = Scalar(1) / fam.jumps.col(c).squaredNorm();
  return spec;
}

// Characteristic function of the limit process at horizon t: the Gaussian
// factor exp(-t |P alpha|^2 / 2) times one compensated-Poisson factor
// exp( t/|x|^2 (e^{i<alpha,x>} - 1 - i<alpha,x>) ) per jump.
template <typename Scalar>
std::complex<Scalar> limit_cf(const LimitSpec<Scalar>& spec,
                              const Eigen::VectorX<Scalar>& alpha, Scalar t) {
  if (alpha.size() != spec.dim) throw StructuralError("limit_cf: alpha dimension mismatch");
  if (!(t >= 0)) throw StructuralError("limit_cf: t must be >= 0");
  std::complex<Scalar> expo(-(t / Scalar(2)) * (spec.projector * alpha).squaredNorm(), 0);
  for (Eigen::Index c = 0; c < spec.jumps.cols(); ++c) {
    const Scalar phase = alpha.dot(spec.jumps.col(c));
    expo += t * spec.intensities(c) *
            (std::exp(std::complex<Scalar>(0, phase)) - std::complex<Scalar>(1, phase));
  }
  return std::exp(expo);
}

// One path of the limit process on a uniform grid (the last cell is
// shortened to land exactly on t). Per cell, the Brownian increment uses
// dim normal draws, then each jump direction draws one Poisson count; the
// compensator is subtracted continuously.
template <typename Scalar>
Trajectory<Scalar> sample_limit_path(const LimitSpec<Scalar>& spec, Scalar t, Scalar grid_step,
                                     std::uint64_t seed, std::uint64_t stream = 0) {
  if (!(grid_step > 0)) throw StructuralError("sample_limit_path: grid step must be > 0");
  if (!(t >= 0)) throw StructuralError("sample_limit_path: t must be >= 0");
  const Eigen::Index n = spec.dim;
  const std::int64_t cells = num_steps(t, grid_step);
  const bool partial = cells * grid_step < t;
  const std::int64_t points = cells + (partial ? 1 : 0) + 1;

  Trajectory<Scalar> traj;
  traj.times.resize(points);
  traj.positions = Eigen::MatrixX<Scalar>::Zero(n, points);
  SubstreamRng rng(seed, stream);
  Eigen::VectorX<Scalar> pos = Eigen::VectorX<Scalar>::Zero(n);
  Eigen::VectorX<Scalar> gauss(n);
  traj.times(0) = 0;
  for (std::int64_t k = 1; k < points; ++k) {
    const Scalar t1 = (k == points - 1) ? t : static_cast<Scalar>(k) * grid_step;
    const Scalar dt = t1 - traj.times(k - 1);
    for (Eigen::Index i = 0; i < n; ++i) gauss(i) = static_cast<Scalar>(rng.normal());
    pos += std::sqrt(dt) * (spec.projector * gauss);
    for (Eigen::Index c = 0; c < spec.jumps.cols(); ++c) {
      const Scalar mean = dt * spec.intensities(c);
      const Scalar count = static_cast<Scalar>(rng.poisson(static_cast<double>(mean)));
      pos += (count - mean) * spec.jumps.col(c);
    }
    traj.times(k) = t1;
    traj.positions.col(k) = pos;
  }
  return traj;
}

// Terminal values of `paths` limit trajectories (exact marginals: one
// Gaussian vector and one Poisson count per jump for the whole horizon).
template <typename Scalar>
Eigen::MatrixX<Scalar> sample_limit_finals(const LimitSpec<Scalar>& spec, Scalar t,
                                           std::int64_t paths, std::uint64_t seed,
                                           int threads = 1) {
  const Eigen::Index n = spec.dim;
  Eigen::MatrixX<Scalar> finals(n, paths);
  detail::parallel_ranges(paths, threads, [&](std::int64_t begin, std::int64_t end) {
    Eigen::VectorX<Scalar> gauss(n);
    for (std::int64_t p = begin; p < end; ++p) {
      SubstreamRng rng(seed, static_cast<std::uint64_t>(p));
      for (Eigen::Index i = 0; i < n; ++i) gauss(i) = static_cast<Scalar>(rng.normal());
      Eigen::VectorX<Scalar> pos = std::sqrt(t) * (spec.projector * gauss);
      for (Eigen::Index c = 0; c < spec.jumps.cols(); ++c) {
        const Scalar mean = t * spec.intensities(c);
        const Scalar count = static_cast<Scalar>(rng.poisson(static_cast<double>(mean)));
        pos += (count - mean) * spec.jumps.col(c);
      }
      finals.col(p) = pos;
    }
  });
  return finals;
}

template <typename Scalar>
struct HLimitResult {
  Tensor3<Scalar> tensor;               // extrapolated limit tensor
  Tensor3<Scalar> last_correction;      // |extrapolation - finest raw evaluation|
  std::vector<Tensor3<Scalar>> raw;     // rescaled tensors along the schedule
  TensorClassification<Scalar> classification;
};

namespace detail {

// Neville polynomial extrapolation to x = 0.
template <typename Scalar>
Scalar extrapolate_to_zero(const std::vector<Scalar>& xs, std::vector<Scalar> ys) {
  const std::size_t m = xs.size();
  for (std::size_t level = 1; level < m; ++level)
    for (std::size_t i = 0; i + level < m; ++i)
      ys[i] = (xs[i + level] * ys[i] - xs[i] * ys[i + 1]) / (xs[i + level] - xs[i]);
  return ys[0];
}

}  // namespace detail

// Entrywise limit of the rescaled tensors sqrt(h) T(family(h)) as h -> 0.
// The caller's schedule drives the convergence diagnostics (successive
// differences per entry must shrink); the reported limit is a two-stage
// Richardson extrapolation in sqrt(h) anchored at the finest schedule entry
// with refinements {h, h/4, h/16}. The result must classify as doubly
// symmetric within `tol`.
template <typename Scalar>
HLimitResult<Scalar> h_limit_tensor(const std::function<ObtuseVariable<Scalar>(Scalar)>& family,
                                    std::span<const Scalar> h_schedule,
                                    Scalar tol = Scalar(1e-6)) {
  if (h_schedule.size() < 3)
    throw StructuralError("h_limit_tensor: schedule needs at least 3 entries");
  for (std::size_t i = 0; i + 1 < h_schedule.size(); ++i)
    if (!(h_schedule[i] > h_schedule[i + 1]) || !(h_schedule[i + 1] > 0))
      throw StructuralError("h_limit_tensor: schedule must be positive and decreasing");

  HLimitResult<Scalar> result;
  result.raw.reserve(h_schedule.size());
  for (const Scalar h : h_schedule)
    result.raw.push_back(rescale(tensor_of(family(h)), h));

  const Eigen::Index n = result.raw.front().dim();
  const Scalar scale = Scalar(1) + result.raw.back().max_abs();

  // Divergence screen: an entry whose successive schedule differences grow
  // has no sqrt(h)-power limit.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        const std::size_t last = h_schedule.size() - 1;
        const Scalar first_diff = std::abs(result.raw[1](i, j, k) - result.raw[0](i, j, k));
        const Scalar last_diff =
            std::abs(result.raw[last](i, j, k) - result.raw[last - 1](i, j, k));
        if (last_diff > std::max(first_diff * Scalar(1.1), scale * Scalar(1e-10))) {
          std::ostringstream msg;
          msg << "h_limit_tensor: entry (" << i + 1 << "," << j + 1 << "," << k + 1
              << ") does not converge (differences " << first_diff << " -> " << last_diff
              << ")";
          throw DivergentTensorError(msg.str());
        }
      }

  const Scalar anchor = h_schedule.back();
  const std::vector<Scalar> hs{anchor, anchor / Scalar(4), anchor / Scalar(16)};
  std::vector<Tensor3<Scalar>> refined;
  refined.reserve(hs.size());
  refined.push_back(result.raw.back());
  for (std::size_t i = 1; i < hs.size(); ++i)
    refined.push_back(rescale(tensor_of(family(hs[i])), hs[i]));

  std::vector<Scalar> xs(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) xs[i] = std::sqrt(hs[i]);

  result.tensor = Tensor3<Scalar>(n);
  result.last_correction = Tensor3<Scalar>(n);
  std::vector<Scalar> ys(hs.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        for (std::size_t q = 0; q < hs.size(); ++q) ys[q] = refined[q](i, j, k);
        result.tensor(i, j, k) = detail::extrapolate_to_zero(xs, ys);
        result.last_correction(i, j, k) =
            std::abs(result.tensor(i, j, k) - refined.back()(i, j, k));
      }

  result.classification = classify(result.tensor, tol);
  if (!result.classification.doubly_symmetric) {
    std::ostringstream msg;
    msg << "h_limit_tensor: extrapolated tensor is not doubly symmetric within " << tol
        << " (symmetry residual " << result.classification.symmetry_residual
        << ", product residual " << result.classification.doubly_residual << ")";
    throw DivergentTensorError(msg.str());
  }
  return result;
}

template <typename Scalar>
struct ConvergenceRow {
  Scalar h;
  Eigen::VectorX<Scalar> alpha;
  Scalar abs_error;
  std::complex<Scalar> discrete;
  std::complex<Scalar> limit;
};

template <typename Scalar>
struct ConvergenceReport {
  std::vector<ConvergenceRow<Scalar>> rows;  // h outer (decreasing), alpha inner
  LimitSpec<Scalar> limit_spec;
  Tensor3<Scalar> limit_tensor;
  Scalar final_max_error = 0;
  bool monotone_within_slack = true;  // max error over alphas non-increasing in h (10% slack)
};

// Tabulates |discrete CF - limit CF| over the (h, alpha) grid. The limit law
// is derived from the family itself through the h-limit tensor.
template <typename Scalar>
ConvergenceReport<Scalar> convergence_report(const ObtuseFamily<Scalar>& family,
                                             std::span<const Scalar> h_schedule,
                                             const std::vector<Eigen::VectorX<Scalar>>& alphas,
                                             Scalar t) {
  if (alphas.empty()) throw StructuralError("convergence_report: empty alpha grid");
  const auto fn = [&family](Scalar h) { return family.at(h); };
  const HLimitResult<Scalar> lim = h_limit_tensor<Scalar>(fn, h_schedule);

  ConvergenceReport<Scalar> report;
  report.limit_tensor = lim.tensor;
  report.limit_spec = limit_from_tensor(lim.tensor);

  Scalar prev_max = 0;
  bool have_prev = false;
  for (const Scalar h : h_schedule) {
    const WalkScenario<Scalar> sc(family.at(h), h, t);
    Scalar level_max = 0;
    for (const auto& alpha : alphas) {
      ConvergenceRow<Scalar> row;
      row.h = h;
      row.alpha = alpha;
      row.discrete = exact_discrete_cf(sc, alpha);
      row.limit = limit_cf(report.limit_spec, alpha, t);
      row.abs_error = std::abs(row.discrete - row.limit);
      level_max = std::max(level_max, row.abs_error);
      report.rows.push_back(std::move(row));
    }
    if (have_prev && level_max > prev_max * Scalar(1.1))
      report.monotone_within_slack = false;
    prev_max = level_max;
    have_prev = true;
    report.final_max_error = level_max;
  }
  return report;
}

}  // namespace obtuse
