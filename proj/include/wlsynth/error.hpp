#pragma once

#include <stdexcept>
#include <string>

namespace wlsynth {

enum class ErrorKind {
  Schema,
  Validation,
  Parse,
  Config,
  Solver,
  Profiling,
  Provider,
  Lookup,
  Io,
};

const char* to_string(ErrorKind kind);

/// Every failure the library raises. `kind()` is stable and machine-readable;
/// the message names the offending column, row, id, or stage.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Config: return "config";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::Profiling: return "profiling";
    case ErrorKind::Provider: return "provider";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace wlsynth
