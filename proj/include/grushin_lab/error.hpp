#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grushin_lab {

enum class ErrorKind {
  DerivativeAtOrigin,
  UnsupportedOrder,
  GridTooCoarse,
  NotCertified,
  NonPositiveInput,
  InvalidSpec,
  BracketFailure,
  MaxGridExceeded,
  InterlacingViolation,
  MissingCertificate,
  RegionEmpty,
  PreconditionViolated,
  WindowOverflow,
  NotConverged,
  TailNotConverged,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace grushin_lab
