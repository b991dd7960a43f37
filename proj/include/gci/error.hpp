#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gci {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An observation lies outside the support of a family.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A parameter vector is outside the family's parameter domain or has the
/// wrong dimension.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Quadrature, summation, or linear algebra failed to reach its tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An exponential moment is infinite. `tail()` names the offending side
/// ("lower" / "upper") or the quantity that blew up.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::string tail)
      : NumericError(what), tail_(std::move(tail)) {}
  const std::string& tail() const noexcept { return tail_; }

 private:
  std::string tail_;
};

/// A Legendre transform was requested at a slope the log-MGF cannot attain.
class RangeError : public NumericError {
 public:
  RangeError(const std::string& what, double lo, double hi)
      : NumericError(what), lo_(lo), hi_(hi) {}
  double attainable_lower() const noexcept { return lo_; }
  double attainable_upper() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// An optimizer failed. Carries the best point seen so the caller can still
/// report something useful.
class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& what, std::vector<double> incumbent,
                    double incumbent_value)
      : Error(what),
        incumbent_(std::move(incumbent)),
        value_(incumbent_value) {}
  const std::vector<double>& incumbent() const noexcept { return incumbent_; }
  double incumbent_value() const noexcept { return value_; }

 private:
  std::vector<double> incumbent_;
  double value_;
};

/// Invalid experiment configuration (unknown key, wrong type, bad value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gci
