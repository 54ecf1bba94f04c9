#ifndef GAC_ERRORS_HPP
#define GAC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gac {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct NotPositiveDefinite : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct EmptyBatch : Error {
  using Error::Error;
};

struct EmptyBuffer : Error {
  using Error::Error;
};

struct SolverDiverged : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  using Error::Error;
};

struct GridTooCoarse : Error {
  using Error::Error;
};

struct InfeasibleBounds : Error {
  using Error::Error;
};

struct NonFiniteState : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace gac

#endif
