#pragma once

#include <stdexcept>
#include <string>

namespace cxnn {

// Base class for all engine errors. Subclasses map to the failure
// categories named in the operation contracts.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Element count overflow or otherwise unrepresentable allocation.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Spatial geometry produces an empty or invalid output.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Object used in a state that forbids the operation (e.g. double backward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Malformed file content; message carries the byte offset where possible.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid architecture/dataset specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Channel widening missed its parameter-ratio tolerance.
class WideningError : public Error {
 public:
  using Error::Error;
};

// Verification oracle detected an inconsistency (e.g. non-deterministic
// loss function handed to the finite-difference checker).
class OracleError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad key/value in a run configuration; message carries the line number.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cxnn
