#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracctrl {

/// Argument outside the mathematical domain of an operation (H outside (0,1), theta <= 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Index or length outside the admissible range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Caller violated a documented precondition of an operation.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Floating-point failure: a non-positive pivot, a rank-deficient design, a non-finite state.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::ptrdiff_t index = -1)
      : std::runtime_error(what), index_(index) {}

  /// Pivot, step or path index that triggered the failure, or -1.
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

/// Malformed or unknown configuration input.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace fracctrl
