#ifndef GIBBSFLOW_ERRORS_HPP
#define GIBBSFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gibbsflow {

// Base for every error raised by the library. Callers that only want to
// distinguish "library refused" from "something else broke" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Requested eigenvalues sit too close to the Dirichlet wall.
class TruncationTooDeep : public Error {
 public:
  using Error::Error;
};

class EigensolverError : public Error {
 public:
  using Error::Error;
};

class DegenerateEnsemble : public Error {
 public:
  using Error::Error;
};

class NonIntegrableCharacteristic : public Error {
 public:
  using Error::Error;
};

class InversionAccuracyError : public Error {
 public:
  using Error::Error;
};

class DivisionGuardError : public Error {
 public:
  using Error::Error;
};

class WindowTooNarrow : public Error {
 public:
  WindowTooNarrow(const std::string& what, double suggested_eps)
      : Error(what), suggested_eps_(suggested_eps) {}
  double suggested_eps() const { return suggested_eps_; }

 private:
  double suggested_eps_;
};

class BlowupDetected : public Error {
 public:
  BlowupDetected(const std::string& what, double t) : Error(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

class ContractionFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gibbsflow

#endif  // GIBBSFLOW_ERRORS_HPP
