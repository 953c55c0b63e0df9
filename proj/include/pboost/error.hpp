#pragma once

#include <stdexcept>
#include <string>

namespace pboost {

/// Error categories. The CLI maps them onto process exit codes.
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + message),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

/// Invalid configuration: unknown columns, bad hyperparameters, malformed terms.
class ConfigError : public Error {
 public:
  ConfigError(std::string module, const std::string& message)
      : Error(ErrorKind::config, std::move(module), message) {}
};

/// Bad input data: schema mismatch, parse failures, domain violations, I/O.
class DataError : public Error {
 public:
  DataError(std::string module, const std::string& message)
      : Error(ErrorKind::data, std::move(module), message) {}
};

class NumericalError : public Error {
 public:
  NumericalError(std::string module, const std::string& message)
      : Error(ErrorKind::numerical, std::move(module), message) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
  }
  return 1;
}

}  // namespace pboost
