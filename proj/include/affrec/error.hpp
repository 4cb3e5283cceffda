// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace affrec {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatch, bad config values, empty grids.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input error: " + what) {}
};

/// The scales do not generate a usable group (e.g. every scale equals 1).
class StructureError : public Error {
 public:
  explicit StructureError(const std::string& what) : Error("structure error: " + what) {}
};

/// A clause of the standing hypothesis on the driving measure fails.
class HypothesisError : public Error {
 public:
  explicit HypothesisError(const std::string& what) : Error("hypothesis error: " + what) {}
};

/// The requested quantity is not defined for this tail-exponent regime.
class RegimeError : public Error {
 public:
  explicit RegimeError(const std::string& what) : Error("regime error: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric error: " + what) {}
};

/// Too few samples or degenerate samples for a statistical estimate.
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what) : Error("estimation error: " + what) {}
};

/// Enumeration would exceed the configured size guard.
class SizeError : public Error {
 public:
  explicit SizeError(const std::string& what) : Error("size error: " + what) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what) : Error("unsupported: " + what) {}
};

}  // namespace affrec
