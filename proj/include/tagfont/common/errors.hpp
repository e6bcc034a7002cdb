#pragma once

#include <stdexcept>
#include <string>

namespace tagfont {

// Base for all recoverable library errors. The pipeline maps subclasses to
// process exit codes (see pipeline/runner.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration / input data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid argument to an operation (shape mismatch, unknown id, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A stage was invoked before the artifacts it depends on exist.
class MissingPrerequisite : public Error {
 public:
  MissingPrerequisite(const std::string& what, std::string required_stage)
      : Error(what + " (run '" + required_stage + "' first)"),
        required_stage_(std::move(required_stage)) {}
  const std::string& required_stage() const { return required_stage_; }

 private:
  std::string required_stage_;
};

// Training produced a non-finite loss.
class NumericalDivergence : public Error {
 public:
  using Error::Error;
};

// Checkpoint / index / manifest format problems, including vocabulary skew.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace tagfont
