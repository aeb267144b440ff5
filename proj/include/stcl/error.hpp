#pragma once

#include <stdexcept>
#include <string>

namespace stcl {

/// Base of every error the library throws. The CLI maps subclasses onto
/// exit codes (see tools/stcl_main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Scene objects or a start pose could not be placed within the retry cap.
class PlacementError : public Error {
 public:
  PlacementError(const std::string& what, long long seed) : Error(what), seed_(seed) {}
  long long seed() const noexcept { return seed_; }

 private:
  long long seed_;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

/// A forward pass produced NaN/Inf, or an update received non-finite input.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A query in an InfoNCE batch was left with no negatives after masking.
class DegenerateBatchError : public Error {
 public:
  DegenerateBatchError(const std::string& what, std::size_t query) : Error(what), query_(query) {}
  std::size_t query() const noexcept { return query_; }

 private:
  std::size_t query_;
};

/// Trajectory/dataset inconsistencies (seed mismatch, malformed records).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Socket setup failures (port in use, bind/listen errors).
class NetworkError : public Error {
 public:
  using Error::Error;
};

}  // namespace stcl
