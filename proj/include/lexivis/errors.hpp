#pragma once

#include <stdexcept>
#include <string>

namespace lexivis {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or layer configuration that cannot be executed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller passed a value outside the operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Anything that goes wrong while loading weights or manifests.
class LoadError : public Error {
 public:
  using Error::Error;
};

class IoError : public LoadError {
 public:
  using LoadError::LoadError;
};

class FormatError : public LoadError {
 public:
  using LoadError::LoadError;
};

class IntegrityError : public LoadError {
 public:
  using LoadError::LoadError;
};

// Straight-line fit is undefined for the given data.
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

// Malformed textual input (counts CSV). Message carries the line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& detail, std::size_t line, const std::string& source = {})
      : Error((source.empty() ? "line " : source + ":") + std::to_string(line) + ": " + detail),
        detail_(detail),
        line_(line) {}
  const std::string& detail() const noexcept { return detail_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string detail_;
  std::size_t line_;
};

}  // namespace lexivis
