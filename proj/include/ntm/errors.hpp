#pragma once

#include <stdexcept>
#include <string>

namespace ntm {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape disagreement; message names both shapes.
struct DimensionError : Error {
  using Error::Error;
};

// A call that violates an operation's stated precondition.
struct ContractError : Error {
  using Error::Error;
};

// Illegal state transition (e.g. double backward without reset).
struct StateError : Error {
  using Error::Error;
};

// Malformed input file; message carries the line number where known.
struct ParseError : Error {
  using Error::Error;
};

// Token index out of vocabulary range.
struct VocabularyError : Error {
  using Error::Error;
};

// Filesystem problem; message names the path.
struct IoError : Error {
  using Error::Error;
};

// Checkpoint does not match the model/corpus it is applied to.
struct MismatchError : Error {
  using Error::Error;
};

// Degenerate numeric situation (zero-norm topic, zero denominator).
struct DegenerateError : Error {
  using Error::Error;
};

}  // namespace ntm
