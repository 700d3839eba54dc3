#pragma once

#include <stdexcept>
#include <string>

namespace raac {

// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, configs or violated preconditions. CLI exit code 2.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed files or records. CLI exit code 3.
class DataFormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public DataFormatError {
 public:
  using DataFormatError::DataFormatError;
};

class BadVersionError : public DataFormatError {
 public:
  using DataFormatError::DataFormatError;
};

class TruncatedFileError : public DataFormatError {
 public:
  using DataFormatError::DataFormatError;
};

// Numerical failure (NaN/inf loss). CLI exit code 4.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace raac
