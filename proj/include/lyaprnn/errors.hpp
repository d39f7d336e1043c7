#pragma once

#include <stdexcept>
#include <string>

namespace lyaprnn {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes: mismatched matrix/vector dimensions, sequences that are
/// too short, spectra of unequal length. Messages name the offending object.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: non-finite values, degenerate (zero) tangent expansion
/// under the `error` policy, overflowed matrix products.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File-system level failure (cannot open/read/write). Messages include the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Messages include the path and location context
/// (line / field / block indices where applicable).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace lyaprnn
