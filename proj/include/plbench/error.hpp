#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plbench {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (non-finite logits, bad percentages, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Operand dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value showed up where training state must stay finite.
class NumericError : public Error {
 public:
  NumericError(const std::string& tensor, const std::string& what)
      : Error(what + " (tensor '" + tensor + "')"), tensor_(tensor) {}

  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

/// Malformed text or binary input. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line > 0 ? ":" + std::to_string(line) : std::string{}) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Results cannot be reported as asked (ragged grid, missing trend cells).
class ReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace plbench
