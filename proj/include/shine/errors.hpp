#pragma once

#include <stdexcept>
#include <string>

namespace shine {

// Base for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text (bracketed trees, corpus files). Messages carry the
// byte offset or line number of the first violation.
struct ParseError : Error {
  using Error::Error;
};

// Schema/range violations in otherwise well-formed data, and bad configs.
struct ValidationError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Tensor shape mismatch; message names both shapes.
struct DimensionError : Error {
  using Error::Error;
};

// Non-finite values, degenerate denominators.
struct NumericError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace shine
