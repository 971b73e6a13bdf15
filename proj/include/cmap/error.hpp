#pragma once

#include <stdexcept>
#include <string>

namespace cmap {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON lines, embedding rows, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an operation's precondition (shapes, sizes, empty inputs).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range hyperparameter or option.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced during a computation.
class NumericFault : public Error {
 public:
  using Error::Error;
};

}  // namespace cmap
