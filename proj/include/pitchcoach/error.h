#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pitchcoach {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-supplied data is invalid. The CLI maps these to exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

/// Text input failed to parse. `line()` is 1-based; 0 when unknown.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A domain invariant (ordering, overlap, range) does not hold.
class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

/// Timestamps went backwards.
class OrderingError : public InputError {
 public:
  using InputError::InputError;
};

/// Unsupported audio or file encoding.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

/// Illegal state machine transition.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Wrong buffer length passed to a fixed-size API.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Wire frame problems on the haptic link.
class WireError : public InputError {
 public:
  enum class Kind { length, framing, corruption, encoding };
  WireError(Kind kind, const std::string& what) : InputError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A persisted log is internally inconsistent.
class CorruptionError : public InputError {
 public:
  using InputError::InputError;
};

class NotFound : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace pitchcoach
