#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sslt {

/// Error categories. The CLI maps each one onto a process exit code.
enum class ErrorKind {
  config,       // bad parameters or configuration (usage)
  data,         // missing/insufficient data, malformed files
  numeric,      // non-finite loss or divergence
  contract,     // an API contract was violated by the caller
  unsupported,  // operation cannot be performed with the inputs given
  io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
  /// Carries every violation found, not only the first.
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what) : Error(ErrorKind::unsupported, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

#define SSLT_CHECK(cond, ErrType, msg) \
  do {                                 \
    if (!(cond)) throw ErrType(msg);   \
  } while (0)

}  // namespace sslt
