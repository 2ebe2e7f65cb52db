#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "obtuse/errors.hpp"
#include "obtuse/family.hpp"
#include "obtuse/limit_process.hpp"
#include "obtuse/tensor3.hpp"
#include "oracles.hpp"

using obtuse::LimitSpecd;
using obtuse::ObtuseFamilyd;
using obtuse::Tensor3d;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

ObtuseFamilyd example1() { return ObtuseFamilyd::planar(0.5, 1.0 / 3.0, 1.0 / 6.0); }

ObtuseFamilyd example2() {
  Eigen::VectorXd base(3), slope(3);
  base << 0.5, 0.0, 0.5;
  slope << 0.0, 1.0, -1.0;
  return ObtuseFamilyd::planar_affine(base, slope);
}

ObtuseFamilyd example3() {
  Eigen::VectorXd base(3), slope(3);
  base << 1.0, 0.0, 0.0;
  slope << -2.0, 1.0, 1.0;
  return ObtuseFamilyd::planar_affine(base, slope);
}

const std::vector<double> kSchedule{1e-1, 1e-2, 1e-3, 1e-4};

LimitSpecd pure_brownian(int n) {
  LimitSpecd spec;
  spec.dim = n;
  spec.projector = Eigen::MatrixXd::Identity(n, n);
  spec.jumps = Eigen::MatrixXd(n, 0);
  spec.intensities = Eigen::VectorXd(0);
  return spec;
}

LimitSpecd single_up_jump() {
  LimitSpecd spec;
  spec.dim = 2;
  spec.projector = Eigen::MatrixXd::Zero(2, 2);
  spec.jumps = Eigen::MatrixXd(2, 1);
  spec.jumps << 0, 1;
  spec.intensities = Eigen::VectorXd(1);
  spec.intensities << 1;
  return spec;
}

}  // namespace

TEST_CASE("limit spec from the zero tensor is pure Brownian") {
  const auto spec = obtuse::limit_from_tensor(Tensor3d(2));
  CHECK(spec.jumps.cols() == 0);
  CHECK((spec.projector - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("limit spec from a single-entry tensor") {
  Tensor3d s(2);
  s(1, 1, 1) = 1.0;
  const auto spec = obtuse::limit_from_tensor(s);
  REQUIRE(spec.jumps.cols() == 1);
  CHECK((spec.jumps.col(0) - vec2(0, 1)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(spec.intensities(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec.projector(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec.projector(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("limit CF closed forms") {
  const auto bm = pure_brownian(2);
  CHECK(obtuse::limit_cf(bm, vec2(0, 0), 1.0) == std::complex<double>(1, 0));
  CHECK(obtuse::limit_cf(bm, vec2(1, 0), 0.0) == std::complex<double>(1, 0));
  CHECK(obtuse::limit_cf(bm, vec2(1, 0), 1.0).real() ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-14));

  const auto jump = single_up_jump();
  const auto cf = obtuse::limit_cf(jump, vec2(0, std::numbers::pi), 1.0);
  const auto expected = std::exp(std::complex<double>(-2.0, -std::numbers::pi));
  CHECK(std::abs(cf - expected) <= 1e-14);
}

TEST_CASE("limit CF has independent stationary increments") {
  std::mt19937_64 gen(73);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor3d s = oracles::random_doubly_symmetric(gen, 2 + rep % 3);
    const auto spec = obtuse::limit_from_tensor(s, gen());
    Eigen::VectorXd alpha(s.dim());
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha(i) = unif(gen);
    const double t = std::abs(unif(gen)), u = std::abs(unif(gen));
    const auto whole = obtuse::limit_cf(spec, alpha, t + u);
    const auto split = obtuse::limit_cf(spec, alpha, t) * obtuse::limit_cf(spec, alpha, u);
    CHECK(std::abs(whole - split) <= 1e-12);
    CHECK(std::abs(obtuse::limit_cf(spec, alpha, t)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("limit paths: degenerate horizon and reproducibility") {
  const auto spec = single_up_jump();
  const auto at_zero = obtuse::sample_limit_path(spec, 0.0, 0.1, 3u);
  CHECK(at_zero.times.size() == 1);
  CHECK(at_zero.positions.cwiseAbs().maxCoeff() == 0.0);

  const auto a = obtuse::sample_limit_path(spec, 1.0, 0.01, 5u, 2u);
  const auto b = obtuse::sample_limit_path(spec, 1.0, 0.01, 5u, 2u);
  CHECK((a.positions - b.positions).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Brownian terminal variance matches the horizon") {
  LimitSpecd bm1 = pure_brownian(1);
  const double t = 0.7;
  const auto finals = obtuse::sample_limit_finals(bm1, t, 10000, 29u, 4);
  const double var = finals.row(0).squaredNorm() / 10000.0;
  CHECK(std::abs(var - t) <= 0.05 * t);
}

TEST_CASE("compensated jump terminal values live on the shifted lattice") {
  const auto spec = single_up_jump();
  const auto finals = obtuse::sample_limit_finals(spec, 1.0, 10000, 31u);
  double mean = 0;
  for (int p = 0; p < 10000; ++p) {
    const double second = finals(1, p);
    CHECK(finals(0, p) == 0.0);
    const double counts = second + 1.0;  // N_1 = X_1 + t * intensity
    CHECK(counts == doctest::Approx(std::round(counts)).epsilon(1e-12));
    CHECK(counts >= 0.0);
    mean += second;
  }
  mean /= 10000.0;
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(10000.0));  // Var(N-1) = 1
}

TEST_CASE("grid sampling and terminal sampling agree in law") {
  const auto spec = single_up_jump();
  double grid_mean = 0;
  for (int p = 0; p < 2000; ++p) {
    const auto traj = obtuse::sample_limit_path(spec, 1.0, 0.05, 41u, static_cast<std::uint64_t>(p));
    grid_mean += traj.positions(1, traj.times.size() - 1);
  }
  grid_mean /= 2000.0;
  CHECK(std::abs(grid_mean) <= 3.0 / std::sqrt(2000.0));
}

TEST_CASE("h-limit of the constant family vanishes") {
  const auto fam = example1();
  const auto fn = [&](double h) { return fam.at(h); };
  const auto lim = obtuse::h_limit_tensor<double>(fn, kSchedule);
  CHECK(lim.tensor.max_abs() <= 1e-10);
  CHECK(lim.classification.doubly_symmetric);
}

TEST_CASE("h-limit of the vanishing-weight family is the single up jump") {
  const auto fam = example2();
  const auto fn = [&](double h) { return fam.at(h); };
  const auto lim = obtuse::h_limit_tensor<double>(fn, kSchedule);
  CHECK(lim.tensor(1, 1, 1) == doctest::Approx(1.0).epsilon(1e-7));
  Tensor3d expected(2);
  expected(1, 1, 1) = 1.0;
  CHECK(obtuse::max_abs_diff(lim.tensor, expected) <= 1e-7);
}

TEST_CASE("h-limit of the concentrated family carries both jump directions") {
  const auto fam = example3();
  const auto fn = [&](double h) { return fam.at(h); };
  const auto lim = obtuse::h_limit_tensor<double>(fn, kSchedule);
  const double c = -1.0 / std::sqrt(2.0);
  Tensor3d expected(2);
  expected(0, 0, 0) = c;
  expected(0, 1, 1) = expected(1, 0, 1) = expected(1, 1, 0) = c;
  CHECK(obtuse::max_abs_diff(lim.tensor, expected) <= 1e-7);

  const auto spec = obtuse::limit_from_tensor(lim.tensor);
  REQUIRE(spec.jumps.cols() == 2);
  Eigen::MatrixXd dirs(2, 2);
  dirs << c, c, -c, c;
  CHECK(obtuse::match_value_sets(dirs, spec.jumps) <= 1e-7);
  CHECK(spec.intensities(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(spec.intensities(1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("h-limit schedule validation") {
  const auto fam = example1();
  const auto fn = [&](double h) { return fam.at(h); };
  const std::vector<double> short_schedule{0.1, 0.01};
  CHECK_THROWS_AS((void)obtuse::h_limit_tensor<double>(fn, short_schedule),
                  obtuse::StructuralError);
  const std::vector<double> increasing{0.01, 0.1, 1.0};
  CHECK_THROWS_AS((void)obtuse::h_limit_tensor<double>(fn, increasing),
                  obtuse::StructuralError);
}

TEST_CASE("h-limit flags entries that blow up") {
  // Weight q = h^2 makes the second value's length grow like 1/h, so the
  // rescaled tensor entry (2,2,2) diverges like h^(-1/2).
  const auto fn = [](double h) { return obtuse::from_planar_chain(0.5, h * h, 0.5 - h * h); };
  try {
    (void)obtuse::h_limit_tensor<double>(fn, kSchedule);
    FAIL("expected DivergentTensorError");
  } catch (const obtuse::DivergentTensorError& e) {
    CHECK(std::string(e.what()).find("(2,2,2)") != std::string::npos);
  }
}

TEST_CASE("convergence report: errors shrink and rows are ordered") {
  const auto fam = example1();
  const std::vector<Eigen::VectorXd> alphas{vec2(0, 0), vec2(1, 0), vec2(1, 1)};
  const auto report = obtuse::convergence_report<double>(fam, kSchedule, alphas, 1.0);
  REQUIRE(report.rows.size() == kSchedule.size() * alphas.size());
  CHECK(report.monotone_within_slack);

  // Zero probe: no error at any h beyond the half-ulp deficit of the stored
  // weights, amplified by the floor(t/h) power.
  for (std::size_t level = 0; level < kSchedule.size(); ++level) {
    const auto& row = report.rows[level * alphas.size()];
    CHECK(row.alpha.cwiseAbs().maxCoeff() == 0.0);
    CHECK(row.abs_error <= 1e-11);
  }

  // h decreases down the table and the final level error is small.
  for (std::size_t r = alphas.size(); r < report.rows.size(); ++r)
    CHECK(report.rows[r].h <= report.rows[r - alphas.size()].h);
  CHECK(report.final_max_error <= 5e-3);
}

TEST_CASE("convergence report covers the jump families") {
  for (const auto& fam : {example2(), example3()}) {
    const std::vector<Eigen::VectorXd> alphas{vec2(0, 1), vec2(1, 1)};
    const auto report = obtuse::convergence_report<double>(fam, kSchedule, alphas, 1.0);
    CHECK(report.monotone_within_slack);
    CHECK(report.final_max_error <= 1e-2);
  }
}
