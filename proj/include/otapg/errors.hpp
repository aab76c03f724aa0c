#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace otapg {

// Bad numeric parameter supplied by the caller (negative variance, m <= 0, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke an API contract (dimension mismatch, out-of-range action).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A theorem or planner precondition does not hold for the given inputs.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EnumerationTooLarge : public std::runtime_error {
 public:
  explicit EnumerationTooLarge(double size)
      : std::runtime_error("trajectory enumeration too large: " + std::to_string(size) +
                           " terms (limit 1e7)"),
        size_(size) {}
  double size() const { return size_; }

 private:
  double size_;
};

// Malformed configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or corrupt experiment output.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace otapg
