#pragma once

#include <stdexcept>
#include <string>

namespace qdrank {

/// Broad failure category. The command-line driver maps these onto exit codes.
enum class ErrorKind { configuration, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::configuration, what) {}
};

// Path / filesystem problems count as configuration errors: the run was pointed at the wrong place.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::configuration, what) {}
};

struct LookupError : Error {
  explicit LookupError(const std::string& what) : Error(ErrorKind::configuration, what) {}
};

struct CompatibilityError : Error {
  explicit CompatibilityError(const std::string& what) : Error(ErrorKind::configuration, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct ParseError : DataError {
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct SchemaError : DataError {
  using DataError::DataError;
};

struct SplitError : DataError {
  using DataError::DataError;
};

struct LabelError : DataError {
  using DataError::DataError;
};

struct InputError : DataError {
  using DataError::DataError;
};

struct DimensionError : DataError {
  using DataError::DataError;
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

struct DegenerateInputError : NumericError {
  using NumericError::NumericError;
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::configuration: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 1;
}

}  // namespace qdrank
