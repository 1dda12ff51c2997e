#pragma once

#include <stdexcept>
#include <string>

namespace mtvqa {

/// Base class for all toolkit errors. `module()` names the subsystem that
/// raised it so the CLI can report a one-line machine-readable failure.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string kind, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)), kind_(std::move(kind)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string module_;
  std::string kind_;
};

class FormatError : public Error {
 public:
  FormatError(std::string module, const std::string& message)
      : Error(std::move(module), "format", message) {}
};

class IoError : public Error {
 public:
  IoError(std::string module, const std::string& message)
      : Error(std::move(module), "io", message) {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string module, const std::string& message)
      : Error(std::move(module), "config", message) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("autodiff", "shape", message) {}
};

class NumericError : public Error {
 public:
  NumericError(std::string module, const std::string& message)
      : Error(std::move(module), "numeric", message) {}
};

}  // namespace mtvqa
