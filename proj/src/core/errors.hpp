#pragma once

#include <stdexcept>
#include <string>

namespace pipofan {

// Error taxonomy mirrored by the C API status codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad function arguments or malformed in-memory structures.
struct InvalidArgumentError : Error {
  using Error::Error;
};

// Filesystem problems: missing files, unreadable paths, write failures.
struct IoError : Error {
  using Error::Error;
};

// Config files that parse but violate the schema, with field paths.
struct ConfigError : Error {
  using Error::Error;
};

// Binary container problems: NIfTI headers, checkpoint framing.
struct FormatError : Error {
  using Error::Error;
};

// Data that is structurally readable but semantically inconsistent
// (label values outside the class map, shape mismatches, bad pyramids).
struct ValidationError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace pipofan
