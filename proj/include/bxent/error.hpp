#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bxent {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input file. `line` is 1-based, 0 when not row-specific.
class InputError : public Error {
 public:
  InputError(const std::string& message, std::string file = {}, std::size_t line = 0);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreprocessError : public Error {
 public:
  using Error::Error;
};

/// A broken internal invariant (a bug, not bad input).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  using Error::Error;
};

class CacheMissError : public AdapterError {
 public:
  using AdapterError::AdapterError;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

/// Wraps any failure inside a pipeline stage with the stage's name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace bxent
