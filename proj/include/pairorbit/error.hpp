#pragma once

#include <stdexcept>
#include <string>

namespace pairorbit {

enum class ErrorKind {
  invalid_argument,
  resolution,
  domain,
  singular_kernel,
  separation,
  cost,
  non_finite,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::domain: return "domain";
    case ErrorKind::singular_kernel: return "singular_kernel";
    case ErrorKind::separation: return "separation";
    case ErrorKind::cost: return "cost";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every validation failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace pairorbit
