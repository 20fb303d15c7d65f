#pragma once

#include <stdexcept>
#include <string>

namespace medfact {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not conform.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Malformed input file (bad header, unparseable cell, bad schema).
class FormatError : public Error {
 public:
  using Error::Error;
};

class PreprocessError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

/// Metric is undefined for the given labels (e.g. single class).
class MetricUndefinedError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace medfact
