#ifndef HJNET_ERRORS_HPP_
#define HJNET_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace hjnet {

// Precondition and validation failures. Everything thrown by the library
// derives from one of these two so callers can tell bad input from a solve
// that did not work out.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGeometry : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class IndexError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class JunctionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class NotCoercive : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class InvalidConstants : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class InvalidCoefficients : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class ShapeMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class ResourceGuard : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Names the failing inequality in what().
class CflViolation : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class BracketFailure : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

class NoConvergence : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

// Raised when every error in a rate fit is exactly zero (or otherwise not
// representable on a log scale).
class DegenerateFit : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

}  // namespace hjnet

#endif  // HJNET_ERRORS_HPP_
