#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace morpheus {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (CLI exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Trace input problems (CLI exit 3).
class TraceError : public Error {
 public:
  using Error::Error;
};

class MalformedLine : public TraceError {
 public:
  MalformedLine(std::size_t line_no, const std::string& text, const std::string& why)
      : TraceError("line " + std::to_string(line_no) + ": " + why + ": '" + text + "'"),
        line_no_(line_no),
        text_(text) {}

  std::size_t line_no() const { return line_no_; }
  const std::string& text() const { return text_; }

 private:
  std::size_t line_no_;
  std::string text_;
};

class HeaderMissing : public TraceError {
 public:
  HeaderMissing() : TraceError("trace does not start with '#morpheus-trace v1'") {}
};

class InvalidSpec : public TraceError {
 public:
  using TraceError::TraceError;
};

// A simulator invariant failed, e.g. a predictor false negative (CLI exit 4).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class InconsistentCounters : public InvariantViolation {
 public:
  using InvariantViolation::InvariantViolation;
};

class CodecError : public Error {
 public:
  using Error::Error;
};

class OutOfPartition : public Error {
 public:
  using Error::Error;
};

class TraceMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace morpheus
