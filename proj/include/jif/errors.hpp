#pragma once

#include <stdexcept>
#include <string>

namespace jif {

// Shapes that cannot be combined by the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (labels, CSV rows, tables).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Byte-level file format violations.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke an operation precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace jif
