#pragma once

#include <stdexcept>
#include <string>

namespace mbt {

// Bad user configuration (flags, config values, unknown names).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anything wrong with the input data: schema, parsing, domain, missing cells.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row)
      : DataError(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class DomainError : public DataError {
 public:
  using DataError::DataError;
};

class MissingValueError : public DataError {
 public:
  using DataError::DataError;
};

// A numerical routine could not produce a result (rank deficiency where a
// full-rank fit is required, non-finite intermediate values).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mbt
