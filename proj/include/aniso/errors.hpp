#pragma once

#include <stdexcept>
#include <string>

namespace aniso {

/// Base class of all library errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// An operation was called outside its documented domain.
class PreconditionError : public Error {
  public:
    using Error::Error;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Malformed input file or failed write.
class IoError : public Error {
  public:
    using Error::Error;
};

/// An iterative method failed to converge.
class ConvergenceError : public Error {
  public:
    using Error::Error;
};

/// NaN or Inf appeared in a computed field.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// A time step produced a negative coefficient in the update.
class CflViolation : public Error {
  public:
    CflViolation(const std::string& what, double coefficient, int i, int j)
        : Error(what), coefficient_(coefficient), i_(i), j_(j) {}
    double coefficient() const { return coefficient_; }
    int i() const { return i_; }
    int j() const { return j_; }

  private:
    double coefficient_;
    int i_;
    int j_;
};

} // namespace aniso
