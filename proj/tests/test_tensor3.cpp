#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "obtuse/errors.hpp"
#include "obtuse/obtuse_variable.hpp"
#include "obtuse/orthogonal_family.hpp"
#include "obtuse/tensor3.hpp"
#include "oracles.hpp"

using obtuse::ObtuseVariabled;
using obtuse::Tensor3d;

namespace {

ObtuseVariabled planar_example() {
  return obtuse::from_planar_chain(0.5, 1.0 / 3.0, 1.0 / 6.0);
}

// The tensor printed for the planar example: entries -1 on every permutation
// of (1,2,2) and on (2,2,2).
Tensor3d planar_example_tensor() {
  Tensor3d t(2);
  t(0, 1, 1) = t(1, 0, 1) = t(1, 1, 0) = t(1, 1, 1) = -1;
  return t;
}

ObtuseVariabled bernoulli() {
  ObtuseVariabled x;
  x.values.resize(1, 2);
  x.values << 1, -1;
  x.probs.resize(2);
  x.probs << 0.5, 0.5;
  return x;
}

}  // namespace

TEST_CASE("tensor of the planar example matches the printed entries") {
  const Tensor3d t = obtuse::tensor_of(planar_example());
  CHECK(obtuse::max_abs_diff(t, planar_example_tensor()) <= 1e-12);
}

TEST_CASE("tensor of the fair coin vanishes") {
  const Tensor3d t = obtuse::tensor_of(bernoulli());
  CHECK(t.max_abs() == 0.0);
}

TEST_CASE("tensor entries equal brute-force third moments") {
  std::mt19937_64 gen(23);
  for (int rep = 0; rep < 25; ++rep) {
    const auto x = oracles::random_obtuse(gen, 1 + rep % 4);
    const Tensor3d t = obtuse::tensor_of(x);
    const int n = static_cast<int>(x.dim());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          CHECK(t(i, j, k) ==
                doctest::Approx(oracles::triple_moment(x, i, j, k)).epsilon(1e-12));
  }
}

TEST_CASE("tensor_of output is exactly index-symmetric") {
  std::mt19937_64 gen(29);
  const auto x = oracles::random_obtuse(gen, 4);
  const Tensor3d t = obtuse::tensor_of(x);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) {
        CHECK(t(i, j, k) == t(j, i, k));
        CHECK(t(i, j, k) == t(k, j, i));
        CHECK(t(i, j, k) == t(i, k, j));
      }
}

TEST_CASE("classification of the planar example tensor") {
  const auto cls = obtuse::classify(obtuse::tensor_of(planar_example()));
  CHECK(cls.sesqui_symmetric);
  CHECK_FALSE(cls.doubly_symmetric);  // the product sum alone is asymmetric here
}

TEST_CASE("classification of zero tensors") {
  // In dimension 1 both conditions degenerate and hold.
  const auto one = obtuse::classify(Tensor3d(1));
  CHECK(one.sesqui_symmetric);
  CHECK(one.doubly_symmetric);

  // In dimension >= 2 the delta term breaks the sesqui condition: no obtuse
  // variable has a vanishing third-moment tensor there.
  const auto two = obtuse::classify(Tensor3d(2));
  CHECK(two.doubly_symmetric);
  CHECK_FALSE(two.sesqui_symmetric);
  CHECK(two.sesqui_residual == doctest::Approx(1.0));
}

TEST_CASE("broken index symmetry fails both classifications") {
  Tensor3d t(2);
  t(0, 1, 0) = 0.5;  // t(1,0,0) left at zero
  const auto cls = obtuse::classify(t);
  CHECK_FALSE(cls.sesqui_symmetric);
  CHECK_FALSE(cls.doubly_symmetric);
  CHECK(cls.symmetry_residual == doctest::Approx(0.5));
}

TEST_CASE("structure residual vanishes for matched pairs") {
  const auto x = planar_example();
  CHECK(obtuse::structure_residual(x, obtuse::tensor_of(x)) <= 1e-12);
  CHECK(obtuse::structure_residual(bernoulli(), Tensor3d(1)) == 0.0);
}

TEST_CASE("structure residual detects a perturbed tensor") {
  const auto x = planar_example();
  Tensor3d t = obtuse::tensor_of(x);
  t(1, 1, 1) += 0.1;
  CHECK(obtuse::structure_residual(x, t) > 1e-3);
}

TEST_CASE("rescale multiplies entrywise by sqrt(h)") {
  const Tensor3d t = obtuse::tensor_of(planar_example());
  CHECK(obtuse::max_abs_diff(obtuse::rescale(t, 1.0), t) == 0.0);

  const Tensor3d s = obtuse::rescale(t, 0.04);
  CHECK(s(1, 1, 1) == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(s(0, 1, 1) == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(std::abs(s(0, 0, 0)) <= 1e-17);
}

TEST_CASE("rescaled tensors satisfy the weighted sesqui identity") {
  for (const double h : {0.04, 0.5, 1e-3}) {
    const auto cls =
        obtuse::classify(obtuse::rescale(obtuse::tensor_of(planar_example()), h), 1e-10, h);
    CHECK(cls.sesqui_residual <= 1e-12);
  }
}

TEST_CASE("system_of recovers the planar example") {
  const auto x = planar_example();
  const auto back = obtuse::system_of(obtuse::tensor_of(x));
  CHECK(obtuse::match_value_sets(x.values, back.values) <= 1e-10);
  CHECK(obtuse::validate(back).pass(1e-8));
}

TEST_CASE("system_of on the zero tensor in dimension 1") {
  const auto back = obtuse::system_of(Tensor3d(1));
  Eigen::MatrixXd expected(1, 2);
  expected << 1, -1;
  CHECK(obtuse::match_value_sets(expected, back.values) <= 1e-12);
  CHECK(back.probs(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("system_of round trip across dimensions") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 30; ++rep) {
    const auto x = oracles::random_obtuse(gen, 1 + rep % 5);
    const Tensor3d t = obtuse::tensor_of(x);
    const auto back = obtuse::system_of(t, 1e-8, gen());
    CHECK(obtuse::match_value_sets(x.values, back.values) <= 1e-8);
    CHECK(obtuse::max_abs_diff(obtuse::tensor_of(back), t) <= 1e-8);
  }
}

TEST_CASE("system_of rejects non-commuting lifted matrices") {
  // The zero tensor in dimension 2 encodes no obtuse variable.
  CHECK_THROWS_AS((void)obtuse::system_of(Tensor3d(2)), obtuse::NotSesquiSymmetricError);
}

TEST_CASE("lifted multiplication matrices commute exactly when sesqui-symmetric") {
  std::mt19937_64 gen(37);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = oracles::random_obtuse(gen, 2 + rep % 3);
    const Tensor3d t = obtuse::tensor_of(x);
    const int n = static_cast<int>(t.dim());
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const Eigen::MatrixXd mi = obtuse::detail::lifted_mult_matrix(t, i);
        const Eigen::MatrixXd mj = obtuse::detail::lifted_mult_matrix(t, j);
        CHECK((mi * mj - mj * mi).cwiseAbs().maxCoeff() <= 1e-12);
      }
  }
}

TEST_CASE("diagonalize the zero tensor: pure Brownian") {
  const auto fam = obtuse::diagonalize(Tensor3d(2));
  CHECK(fam.jumps.cols() == 0);
  CHECK((fam.projector - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(fam.eigenvalues.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("diagonalize a single-jump tensor") {
  Tensor3d a(2);
  a(1, 1, 1) = 1.0;
  const auto fam = obtuse::diagonalize(a);
  REQUIRE(fam.jumps.cols() == 1);
  CHECK(fam.jumps(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fam.jumps(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fam.projector(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fam.projector(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(oracles::fixed_point_residual(a, fam.jumps.col(0), 0.0) <= 1e-12);
}

TEST_CASE("diagonalize the equal-weight two-jump tensor") {
  // Entries -1/sqrt(2) on all permutations of (1,1,1) and (1,2,2).
  const double c = -1.0 / std::sqrt(2.0);
  Tensor3d a(2);
  a(0, 0, 0) = c;
  a(0, 1, 1) = a(1, 0, 1) = a(1, 1, 0) = c;
  const auto fam = obtuse::diagonalize(a);
  REQUIRE(fam.jumps.cols() == 2);
  Eigen::MatrixXd expected(2, 2);
  expected << c, c, -c, c;  // (-1,1)/sqrt(2) and (-1,-1)/sqrt(2)
  CHECK(obtuse::match_value_sets(expected, fam.jumps) <= 1e-12);
  for (int j = 0; j < 2; ++j)
    CHECK(oracles::fixed_point_residual(a, fam.jumps.col(j), 0.0) <= 1e-12);
}

TEST_CASE("diagonalize rejects tensors that are not doubly symmetric") {
  CHECK_THROWS_AS((void)obtuse::diagonalize(obtuse::tensor_of(planar_example())),
                  obtuse::DegenerateTensorError);
}

TEST_CASE("reconstruct inverts diagonalize") {
  CHECK(obtuse::reconstruct(obtuse::diagonalize(Tensor3d(3))).max_abs() == 0.0);

  Tensor3d single(2);
  single(1, 1, 1) = 1.0;
  obtuse::OrthogonalFamilyd fam;
  fam.basis = Eigen::MatrixXd::Identity(2, 2);
  fam.eigenvalues = Eigen::Vector2d(0, 1);
  fam.jumps = Eigen::MatrixXd(2, 1);
  fam.jumps << 0, 1;
  fam.projector = Eigen::MatrixXd::Zero(2, 2);
  fam.projector(0, 0) = 1;
  CHECK(obtuse::max_abs_diff(obtuse::reconstruct(fam), single) == 0.0);

  std::mt19937_64 gen(41);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 2 + rep % 5;
    const Tensor3d a = oracles::random_doubly_symmetric(gen, n);
    const auto f = obtuse::diagonalize(a, gen());
    CHECK(obtuse::max_abs_diff(obtuse::reconstruct(f), a) <= 1e-10);
    for (Eigen::Index j = 0; j < f.jumps.cols(); ++j)
      CHECK(oracles::fixed_point_residual(a, f.jumps.col(j), 0.0) <= 1e-9);
  }
}
