// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <stdexcept>
#include <string>

namespace gridlmp {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- grid / case file -------------------------------------------------------

// A field in a case file failed to parse or violates a record invariant.
class MalformedField : public Error {
 public:
  MalformedField(int line, int column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// A branch or generator references a bus id that does not exist.
class DanglingBranch : public Error {
 public:
  using Error::Error;
};

class NoSlackBus : public Error {
 public:
  using Error::Error;
};

class DuplicateBusId : public Error {
 public:
  using Error::Error;
};

class ZeroImpedanceBranch : public Error {
 public:
  using Error::Error;
};

class PowerIterationDiverged : public Error {
 public:
  using Error::Error;
};

// --- opf --------------------------------------------------------------------

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularKktSystem : public Error {
 public:
  using Error::Error;
};

class InfeasibleBounds : public Error {
 public:
  using Error::Error;
};

class ResolveFailed : public Error {
 public:
  using Error::Error;
};

// The binding inequality set differs between the two perturbed solves, so the
// central difference does not estimate a one-sided price.
class ActiveSetChanged : public Error {
 public:
  using Error::Error;
};

// --- neural core ------------------------------------------------------------

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NotScalarLoss : public Error {
 public:
  using Error::Error;
};

// backward() was called twice on the same recorded tape.
class TapeConsumed : public Error {
 public:
  using Error::Error;
};

class MissingGso : public Error {
 public:
  using Error::Error;
};

// --- pipeline ---------------------------------------------------------------

class TooManyFailures : public Error {
 public:
  using Error::Error;
};

class DatasetModelMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace gridlmp
