#pragma once

#include <stdexcept>
#include <string>

namespace dln {

// Root of every error raised by the library. Subclasses map onto the
// failure classes the command-line tool reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed CSV input or inconsistent tabular data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Model / circuit documents that cannot be read back.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

// Forward/backward called with inputs that do not match the network.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace dln
