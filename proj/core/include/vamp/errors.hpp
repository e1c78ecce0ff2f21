#pragma once

#include <stdexcept>
#include <string>

namespace vamp {

// Bad caller input: shape mismatches, out-of-range values, violated invariants.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed bytes while parsing one of the binary file formats.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Recognized format but a version this build does not handle.
struct UnsupportedVersionError : FormatError {
  using FormatError::FormatError;
};

// Payload checksum mismatch on an otherwise well-formed file.
struct CorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Read/write failure on an underlying stream.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or numerically invalid state detected mid-computation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vamp
