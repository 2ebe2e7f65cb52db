#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "obtuse/errors.hpp"
#include "obtuse/obtuse_variable.hpp"
#include "obtuse/walks.hpp"
#include "oracles.hpp"

using obtuse::ObtuseVariabled;
using obtuse::WalkScenariod;

namespace {

ObtuseVariabled planar_example() {
  return obtuse::from_planar_chain(0.5, 1.0 / 3.0, 1.0 / 6.0);
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("scenario validation and step counts") {
  CHECK_THROWS_AS(WalkScenariod(planar_example(), 0.0, 1.0), obtuse::StructuralError);
  CHECK_THROWS_AS(WalkScenariod(planar_example(), 0.1, -1.0), obtuse::StructuralError);
  CHECK(WalkScenariod(planar_example(), 0.01, 1.0).steps() == 100);
}

TEST_CASE("horizon shorter than one step gives a single-point trajectory") {
  const WalkScenariod sc(planar_example(), 0.5, 0.2);
  const auto traj = obtuse::sample_walk(sc, 1u);
  CHECK(traj.times.size() == 1);
  CHECK(traj.positions.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trajectories are reproducible and stream-addressable") {
  const WalkScenariod sc(planar_example(), 0.01, 1.0);
  const auto a = obtuse::sample_walk(sc, 99u, 3u);
  const auto b = obtuse::sample_walk(sc, 99u, 3u);
  CHECK((a.positions - b.positions).cwiseAbs().maxCoeff() == 0.0);

  const auto c = obtuse::sample_walk(sc, 99u, 4u);
  CHECK((a.positions - c.positions).cwiseAbs().maxCoeff() > 0.0);

  // Batch column k equals the standalone trajectory of stream k.
  const auto finals = obtuse::sample_walk_finals(sc, 8, 99u);
  CHECK((finals.col(3) - a.positions.col(a.times.size() - 1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampling is independent of the thread count") {
  const WalkScenariod sc(planar_example(), 0.02, 1.0);
  const auto one = obtuse::sample_walk_finals(sc, 500, 7u, 1);
  const auto four = obtuse::sample_walk_finals(sc, 500, 7u, 4);
  CHECK((one - four).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("increments follow the atom distribution") {
  const auto x = planar_example();
  const WalkScenariod sc(x, 1.0, 20000.0);
  const auto traj = obtuse::sample_walk(sc, 2024u);
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  for (Eigen::Index k = 1; k < traj.times.size(); ++k) {
    const Eigen::VectorXd inc = traj.positions.col(k) - traj.positions.col(k - 1);
    for (int s = 0; s < 3; ++s)
      if ((inc - x.values.col(s)).cwiseAbs().maxCoeff() < 1e-12) counts(s) += 1;
  }
  CHECK(counts.sum() == 20000);  // every increment is one of the scaled values
  for (int s = 0; s < 3; ++s) {
    const double p = x.probs(s);
    const double sigma = std::sqrt(20000.0 * p * (1 - p));
    CHECK(std::abs(counts(s) - 20000.0 * p) <= 4 * sigma);
  }
}

TEST_CASE("walk means concentrate at the CLT rate") {
  const WalkScenariod sc(planar_example(), 0.01, 1.0);
  const auto finals = obtuse::sample_walk_finals(sc, 20000, 11u, 4);
  const Eigen::VectorXd mean = finals.rowwise().mean();
  // The walk is centered with identity covariance at t=1.
  CHECK(mean.cwiseAbs().maxCoeff() <= 3.0 / std::sqrt(20000.0));
}

TEST_CASE("exact CF: trivial and closed-form values") {
  const WalkScenariod sc(planar_example(), 0.01, 1.0);
  // At alpha = 0 the CF is the total probability mass to the steps-th power;
  // the stored weights sum to 1 only up to half an ulp.
  CHECK(std::abs(obtuse::exact_discrete_cf(sc, vec2(0, 0)) - std::complex<double>(1, 0)) <=
        1e-13);

  const auto cf = obtuse::exact_discrete_cf(sc, vec2(1, 0));
  CHECK(cf.real() == doctest::Approx(std::pow(std::cos(0.1), 100)).epsilon(1e-12));
  CHECK(std::abs(cf.imag()) <= 1e-12);

  const WalkScenariod fine(planar_example(), 1e-4, 1.0);
  const auto cf_fine = obtuse::exact_discrete_cf(fine, vec2(1, 0));
  CHECK(std::abs(cf_fine - std::exp(std::complex<double>(-0.5, 0))) <= 5e-5);
}

TEST_CASE("exact CF is a characteristic function") {
  std::mt19937_64 gen(61);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 1 + rep % 4;
    const auto x = oracles::random_obtuse(gen, n);
    const double h = 0.001 + std::abs(unif(gen)) / 4.0;
    const WalkScenariod sc(x, h, 0.5 + std::abs(unif(gen)));
    Eigen::VectorXd alpha(n);
    for (int i = 0; i < n; ++i) alpha(i) = unif(gen);
    const auto plus = obtuse::exact_discrete_cf(sc, alpha);
    const auto minus = obtuse::exact_discrete_cf(sc, Eigen::VectorXd(-alpha));
    CHECK(std::abs(plus) <= 1.0 + 1e-12);
    CHECK(std::abs(plus - std::conj(minus)) <= 1e-12);
  }
}

TEST_CASE("operator-side and probability-side CFs agree across scenarios") {
  std::mt19937_64 gen(67);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + rep % 3;
    const auto x = oracles::random_obtuse(gen, n, 0.05);
    const double h = 0.002 + std::abs(unif(gen)) / 8.0;
    const double t = 0.2 + std::abs(unif(gen));
    const WalkScenariod sc(x, h, t);
    Eigen::VectorXd alpha(n);
    for (int i = 0; i < n; ++i) alpha(i) = unif(gen);
    const auto walk_side = obtuse::exact_discrete_cf(sc, alpha);
    const auto op_side = obtuse::operator_cf(x, obtuse::tensor_of(x), alpha, h, t);
    CHECK(std::abs(walk_side - op_side) <= 1e-10);
  }
}

TEST_CASE("empirical CF basics") {
  const Eigen::MatrixXd at_origin = Eigen::MatrixXd::Zero(2, 1);
  const auto single = obtuse::empirical_cf(at_origin, vec2(0.7, -0.3));
  CHECK(single.value == std::complex<double>(1, 0));
  CHECK(single.std_error == 0.0);

  const WalkScenariod sc(planar_example(), 0.05, 1.0);
  const auto finals = obtuse::sample_walk_finals(sc, 2000, 5u);
  const auto zero_alpha = obtuse::empirical_cf(finals, vec2(0, 0));
  CHECK(zero_alpha.value.real() == 1.0);
  CHECK(zero_alpha.value.imag() == 0.0);
}

TEST_CASE("empirical CF matches the exact CF within its standard error band") {
  const WalkScenariod sc(planar_example(), 0.05, 1.0);
  const Eigen::VectorXd alpha = vec2(1, 0);
  const auto exact = obtuse::exact_discrete_cf(sc, alpha);
  double previous_se = 1.0;
  for (const std::int64_t paths : {1000, 10000, 100000}) {
    const auto finals = obtuse::sample_walk_finals(sc, paths, 123u, 4);
    const auto emp = obtuse::empirical_cf(finals, alpha);
    CHECK(std::abs(emp.value - exact) <= 3 * emp.std_error);
    CHECK(emp.std_error < previous_se);  // shrinks like 1/sqrt(paths)
    previous_se = emp.std_error;
  }
}

TEST_CASE("empirical CF csv layout") {
  std::vector<Eigen::VectorXd> alphas{vec2(1, 0), vec2(0, 1)};
  std::vector<obtuse::EmpiricalCf<double>> cfs{{std::complex<double>(0.5, 0.25), 0.01},
                                               {std::complex<double>(1, 0), 0.0}};
  std::ostringstream os;
  obtuse::write_empirical_cf_csv(os, alphas, cfs);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "alpha_1,alpha_2,re_cf,im_cf,stderr");
  std::getline(in, row);
  CHECK(row == "1,0,0.5,0.25,0.01");
}

TEST_CASE("discrete structure identity holds at every scale") {
  const auto x = planar_example();
  CHECK(obtuse::discrete_structure_residual(x, 1.0) ==
        obtuse::structure_residual(x, obtuse::tensor_of(x)));
  CHECK(obtuse::discrete_structure_residual(x, 0.04) <= 1e-12);

  std::mt19937_64 gen(71);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto y = oracles::random_obtuse(gen, 1 + rep % 4);
    const double h = 1e-4 + unif(gen) * (1.0 - 1e-4);
    CHECK(obtuse::discrete_structure_residual(y, h) <= 1e-10);
  }
}
