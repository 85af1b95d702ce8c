#pragma once

#include <stdexcept>

namespace maskseed {

// Geometry or configuration inconsistency (bad shapes, invalid presets).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was called outside its contract.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or mismatched input file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A tensor stopped being finite (NaN/Inf).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace maskseed
