#pragma once

#include <stdexcept>
#include <string>

namespace ersft {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A distribution lacks support where an operation requires it.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file; carries the 1-based line number.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Training produced a non-finite loss or weight.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric evaluation over an empty (filtered) case set.
class EmptySetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ersft
