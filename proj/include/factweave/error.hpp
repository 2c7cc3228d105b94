#pragma once

#include <stdexcept>
#include <string>

namespace factweave {

// Base class for every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or width disagreement between tensors / vectors.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input file is missing or unreadable.
class IoError : public Error {
 public:
  using Error::Error;
};

// Input file exists but its content is malformed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, or training diverged.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace factweave
