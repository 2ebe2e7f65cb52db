#pragma once

#include <stdexcept>
#include <string>

namespace obtuse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape violations (mismatched lengths, bad dimensions). Distinct from
// numeric validation failures, which are reported through ValidationReport.
struct StructuralError : Error {
  using Error::Error;
};

// Probability vectors that are not a distribution.
struct InvalidDistributionError : Error {
  using Error::Error;
};

// Planar-chain parameters whose radicands are not strictly positive.
struct InfeasibleParametersError : Error {
  using Error::Error;
};

// The lifted multiplication matrices of a 3-tensor do not commute within
// tolerance, or no probe vector separated their joint spectrum.
struct NotSesquiSymmetricError : Error {
  using Error::Error;
};

// Eigen-gap failure after retries while diagonalizing a 3-tensor.
struct DegenerateTensorError : Error {
  using Error::Error;
};

// An h-limit tensor entry whose successive differences do not shrink.
struct DivergentTensorError : Error {
  using Error::Error;
};

// Scenario configuration parse or validation failure.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace obtuse
