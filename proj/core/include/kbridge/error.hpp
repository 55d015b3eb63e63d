#ifndef KBRIDGE_ERROR_HPP_
#define KBRIDGE_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kbridge {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Array length or field shape does not match the grid.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied data is malformed (non-finite, negative density, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Prior coefficients violate ellipticity or killing-rate sign constraints.
class ModelError : public Error {
 public:
  using Error::Error;
};

// Hilbert metric evaluated outside the positive cone.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in an intermediate quantity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Materializing a kernel or coupling would exceed the configured size.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// The target killed mass sits where the prior cannot kill. Carries the
// offending (time index, space index) pair.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::size_t time_index,
                  std::size_t space_index)
      : Error(what), time_index_(time_index), space_index_(space_index) {}

  std::size_t time_index() const noexcept { return time_index_; }
  std::size_t space_index() const noexcept { return space_index_; }

 private:
  std::size_t time_index_;
  std::size_t space_index_;
};

}  // namespace kbridge

#endif  // KBRIDGE_ERROR_HPP_
