#pragma once

#include <stdexcept>
#include <string>

namespace qdyn {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A state violated a physical-validity tolerance (Hermiticity, trace,
// positivity, imaginary residue of an expectation, ...).
class InvalidState : public Error {
 public:
  using Error::Error;
};

class NonHermitianInput : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// Linear system rejected by the reciprocal-condition threshold.
class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, double rcond) : Error(what), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

class OddConstraintCount : public Error {
 public:
  using Error::Error;
};

// The w or m geometry matrix is not invertible at the current state.
class SingularConstraintGeometry : public Error {
 public:
  SingularConstraintGeometry(const std::string& what, double rcond) : Error(what), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

class StepSizeUnderflow : public Error {
 public:
  using Error::Error;
};

// Scenario document failed schema or physical validation.
class ScenarioParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace qdyn
