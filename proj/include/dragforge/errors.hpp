// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dragforge {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A coordinate fell outside the grid it was bound to.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Tensor dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter or argument violates its precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed (NaN features, bad labels, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite or degenerate value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File or stream could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dragforge
