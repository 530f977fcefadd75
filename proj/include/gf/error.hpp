#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gf {

// Base for every error raised by the library. The C API maps each subclass to
// a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes rejected by a tensor primitive.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& primitive, const std::string& detail)
      : Error(primitive + ": " + detail), primitive_(primitive) {}
  const std::string& primitive() const { return primitive_; }

 private:
  std::string primitive_;
};

// Violated call contract (non-scalar backward, bad argument ranges, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Text that failed to parse; offset is a 0-based byte position in the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Missing or inconsistent configuration (unregistered formula, bad key).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent tabular data (missing columns, mismatched sizes).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gf
