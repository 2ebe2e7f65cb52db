#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "obtuse/errors.hpp"
#include "obtuse/obtuse_variable.hpp"

namespace obtuse {

// A step-size-indexed family of obtuse variables. Probabilities are affine
// in h (alpha_i(h) = base_i + slope_i * h), either fed to the orthogonal
// completion of from_probabilities or to the planar three-point chain.
// Constant families are affine families with zero slope.
template <typename Scalar>
class ObtuseFamily {
 public:
  static ObtuseFamily constant_probs(Eigen::VectorX<Scalar> probs,
                                     std::optional<std::uint64_t> seed = std::nullopt) {
    return affine_probs(std::move(probs), Eigen::VectorX<Scalar>(), seed);
  }

  static ObtuseFamily affine_probs(Eigen::VectorX<Scalar> base, Eigen::VectorX<Scalar> slope,
                                   std::optional<std::uint64_t> seed = std::nullopt) {
    ObtuseFamily f;
    f.planar_ = false;
    f.base_ = std::move(base);
    f.slope_ = std::move(slope);
    f.seed_ = seed;
    if (f.slope_.size() == 0) f.slope_ = Eigen::VectorX<Scalar>::Zero(f.base_.size());
    if (f.base_.size() != f.slope_.size() || f.base_.size() < 2)
      throw StructuralError("obtuse family: need matching base/slope with >= 2 atoms");
    return f;
  }

  static ObtuseFamily planar(Scalar p, Scalar q, Scalar r) {
    Eigen::VectorX<Scalar> base(3);
    base << p, q, r;
    return planar_affine(base, Eigen::VectorX<Scalar>::Zero(3));
  }

  static ObtuseFamily planar_affine(Eigen::VectorX<Scalar> base, Eigen::VectorX<Scalar> slope) {
    ObtuseFamily f;
    f.planar_ = true;
    f.base_ = std::move(base);
    f.slope_ = std::move(slope);
    if (f.base_.size() != 3 || f.slope_.size() != 3)
      throw StructuralError("obtuse family: planar chains take exactly three weights");
    return f;
  }

  ObtuseVariable<Scalar> at(Scalar h) const {
    const Eigen::VectorX<Scalar> probs = base_ + h * slope_;
    if (planar_) return from_planar_chain(probs(0), probs(1), probs(2));
    return from_probabilities(probs, seed_);
  }

  Eigen::Index dim() const { return planar_ ? 2 : base_.size() - 1; }
  bool depends_on_h() const { return slope_.cwiseAbs().maxCoeff() > Scalar(0); }
  bool is_planar() const { return planar_; }
  const Eigen::VectorX<Scalar>& base() const { return base_; }
  const Eigen::VectorX<Scalar>& slope() const { return slope_; }

 private:
  ObtuseFamily() = default;
  bool planar_ = false;
  Eigen::VectorX<Scalar> base_;
  Eigen::VectorX<Scalar> slope_;
  std::optional<std::uint64_t> seed_;
};

using ObtuseFamilyd = ObtuseFamily<double>;

}  // namespace obtuse
