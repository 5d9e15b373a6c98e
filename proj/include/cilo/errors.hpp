#pragma once

#include <stdexcept>
#include <string>

namespace cilo {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasiblePolyhedron : Error {
  using Error::Error;
};

struct NumericalFailure : Error {
  using Error::Error;
};

struct BudgetInfeasible : Error {
  using Error::Error;
};

struct DualUnbounded : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct EmptyCandidateSet : Error {
  using Error::Error;
};

struct OnBoundary : Error {
  using Error::Error;
};

struct DirectionUndefined : Error {
  using Error::Error;
};

struct EmptyGrid : Error {
  using Error::Error;
};

struct SingularSystem : Error {
  using Error::Error;
};

struct FeasibilityResampleExceeded : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace cilo
