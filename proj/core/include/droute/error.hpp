#pragma once

#include <stdexcept>
#include <string>

namespace droute {

// Base of every error the library throws. Subclasses map onto the CLI exit
// codes (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values: cluster k > n, capacity < 9, K >= n, ...
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input that has no meaningful answer: all points identical, a softmax whose
// mask forbids every entry.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition (infeasible tour, non-scalar loss, empty batch).
class ContractError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public ParseError {
 public:
  using ParseError::ParseError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf reached the optimizer. Training writes a checkpoint before this is
// raised.
class NumericalAbort : public Error {
 public:
  using Error::Error;
};

// Process exit code for the CLI: 2 parse, 3 config, 4 numerical abort, 1 other.
int exit_code(const std::exception& e) noexcept;

}  // namespace droute
