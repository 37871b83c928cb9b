#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace viscofe {

enum class ErrorKind {
  InvalidDeformation,
  Parameter,
  Contract,
  DivisionByZero,
  StepTooLarge,
  NonConvergence,
  Geometry,
  SingularSystem,
  Io,
  Parse,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for all solver failures. The kind is machine readable.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace viscofe
