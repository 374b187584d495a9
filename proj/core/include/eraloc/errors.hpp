// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <stdexcept>
#include <string>

namespace eraloc {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (e.g. angles).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Dimension or length disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration. The CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector too close to zero to be projected onto a sphere.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A sensing configuration violates the power or pattern-norm constraint.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

/// Object used in the wrong lifecycle state (e.g. optimizer before backward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Scene generation hit an impossible geometry.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a numeric operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace eraloc
