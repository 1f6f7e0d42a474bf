#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glance {

// Exception hierarchy. The CLI maps each family onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Invalid configuration or argument ranges (exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Wrong shapes, missing files, malformed inputs (exit 3).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Binary parse failure that knows where it happened.
class ParseError : public DataError {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : DataError("parse error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Non-finite losses or parameters (exit 4).
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

// Gaze pointing away from the image plane; callers usually skip the frame.
class GazeAwayError : public Error {
 public:
  using Error::Error;
};

}  // namespace glance
