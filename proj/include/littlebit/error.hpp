// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace littlebit {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Rank outside the admissible range for a shape.
class RankError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf where finite values are required, or a numeric breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Input violating a documented precondition (negative matrix, zero matrix, bad sign value).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Base of on-disk format errors.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Header fields and payload disagree (word counts, pad bits, trailing bytes).
class InconsistentError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Target bits-per-weight below what the scale vectors alone cost.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace littlebit
