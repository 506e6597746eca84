#pragma once

#include <stdexcept>
#include <string>

namespace causalsoil {

// Exit codes used by the command-line tool; each error category maps to one.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what),
        code_(code),
        where_(where) {}

  ExitCode code() const noexcept { return code_; }
  const std::string& where() const noexcept { return where_; }

 private:
  ExitCode code_;
  std::string where_;
};

/// Malformed tables, unknown columns, inconsistent schemas.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& where, const std::string& what)
      : Error(ExitCode::kData, where, what) {}
};

/// Invalid configuration values (window <= 0, alpha outside (0,1), ...).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : Error(ExitCode::kUsage, where, what) {}
};

/// Non-finite losses, singular systems that cannot be rescued, ...
class NumericError : public Error {
 public:
  NumericError(const std::string& where, const std::string& what)
      : Error(ExitCode::kNumeric, where, what) {}
};

}  // namespace causalsoil
