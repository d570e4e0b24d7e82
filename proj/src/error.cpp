#include "grushin_lab/error.hpp"

namespace grushin_lab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DerivativeAtOrigin: return "DerivativeAtOrigin";
    case ErrorKind::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::NotCertified: return "NotCertified";
    case ErrorKind::NonPositiveInput: return "NonPositiveInput";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::MaxGridExceeded: return "MaxGridExceeded";
    case ErrorKind::InterlacingViolation: return "InterlacingViolation";
    case ErrorKind::MissingCertificate: return "MissingCertificate";
    case ErrorKind::RegionEmpty: return "RegionEmpty";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::WindowOverflow: return "WindowOverflow";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::TailNotConverged: return "TailNotConverged";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace grushin_lab
