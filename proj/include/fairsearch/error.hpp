#pragma once

#include <stdexcept>
#include <string>

namespace fairsearch {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or an unusable combination of settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A schema file is malformed or does not match the dataset header.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A dataset row violates its schema.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (e.g. passed an empty list).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace fairsearch
