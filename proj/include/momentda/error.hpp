#pragma once

#include <stdexcept>
#include <string>

namespace momentda {

/// Precondition violations: degree out of range, dimension mismatch, empty sample.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quadrature grid too coarse for the density it is asked to represent.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite integrand or log-density at a node that carries weight.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failures in moment files, density specs and similar inputs.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace momentda
