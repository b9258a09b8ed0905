#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nuts {

/// Invalid arguments, incompatible settings or dimension mismatches.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A log density or gradient evaluated to a non-finite value.
class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, std::ptrdiff_t coordinate)
      : std::runtime_error(what), coordinate_(coordinate) {}

  /// Offending coordinate, or -1 when the log density itself is non-finite.
  std::ptrdiff_t coordinate() const noexcept { return coordinate_; }

 private:
  std::ptrdiff_t coordinate_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Step-size initialization could not find a usable scale.
class InitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Proposal-scale tuning failed to bracket or converge.
class TuningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing experiment artifacts failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nuts
