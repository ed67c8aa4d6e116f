#pragma once

#include <stdexcept>
#include <string>

namespace slp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (mismatched dimensions, bad kernel, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A requested frame or file does not exist in the bound dataset.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// The run configuration cannot be satisfied by the inputs (e.g. an
/// sfm-sam variant without scene geometry).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace slp
