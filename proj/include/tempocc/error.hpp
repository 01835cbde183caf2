#pragma once

#include <stdexcept>
#include <string>

namespace tempocc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, degenerate inputs, or a solver that failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message carries the 1-based row number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Invalid or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tempocc
