#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace salm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error { using Error::Error; };
class EncodingError : public Error { using Error::Error; };
class SamplingError : public Error { using Error::Error; };
class LengthError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class IntegrityError : public Error { using Error::Error; };
class VersionError : public Error { using Error::Error; };
class ReferenceError : public Error { using Error::Error; };
class MetricError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace salm
