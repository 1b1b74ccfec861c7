#pragma once

#include <stdexcept>
#include <string>

namespace clad {

enum class ErrorKind {
  Dimension,
  Numeric,
  Precondition,
  Label,
  Io,
  Format,
  Prerequisite,
  Config,
  State,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Label: return "label";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Prerequisite: return "prerequisite";
    case ErrorKind::Config: return "config";
    case ErrorKind::State: return "state";
  }
  return "unknown";
}

/// Base for every error the library raises. `kind()` lets callers (the CLI in
/// particular) map failures to distinct exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorKind::Dimension, what) {}
};

class NumericError : public Error {
 public:
  NumericError(const std::string& op, const std::string& what)
      : Error(ErrorKind::Numeric, op + ": " + what), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

class LabelError : public Error {
 public:
  explicit LabelError(const std::string& what) : Error(ErrorKind::Label, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::Format, what) {}
};

class PrerequisiteError : public Error {
 public:
  explicit PrerequisiteError(const std::string& what) : Error(ErrorKind::Prerequisite, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorKind::State, what) {}
};

}  // namespace clad
