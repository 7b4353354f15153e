#pragma once

#include <stdexcept>
#include <string>

namespace chemolab {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed configuration, violated precondition, mismatched grids.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce an admissible result
/// (non-convergence, CFL violation, loss of positivity).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace chemolab
