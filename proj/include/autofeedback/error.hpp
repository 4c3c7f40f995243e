#pragma once

#include <stdexcept>
#include <string>

namespace autofeedback {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad files, unknown labels, contract violations by callers.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A type invariant was violated by code that should have upheld it.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Stored data disagrees with itself (cache digest collision, tampered files).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace autofeedback
