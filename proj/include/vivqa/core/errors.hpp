#pragma once

#include <stdexcept>
#include <string>

namespace vivqa {

/// Incompatible tensor shapes.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Out-of-range index, token id or class id.
class IndexError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// Invalid argument value (bad permutation, zero pool size, ...).
class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. calling backward twice on the same graph.
class UsageError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Malformed binary file (bad magic, version, checksum, truncation).
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent run configuration.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad corpus or record content.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public DataError {
  public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Statistical test preconditions violated (e.g. zero variance).
class StatsError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace vivqa
