#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mhlti {

/// Failure categories surfaced by the library. The CLI maps these onto exit codes.
enum class ErrorKind {
  DimensionMismatch,
  InvalidArgument,
  NotPositiveSemidefinite,
  Divergence,
  NonpositiveGap,
  SingularCovariance,
  EigenFailure,
  QuadratureFailure,
  UtilityDomain,
  DegenerateSeparation,
  NoFeasibleThreshold,
  NoFeasibleContract,
  ConfigParse,
  ConfigInvalid,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorKind::Divergence: return "Divergence";
    case ErrorKind::NonpositiveGap: return "NonpositiveGap";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::UtilityDomain: return "UtilityDomain";
    case ErrorKind::DegenerateSeparation: return "DegenerateSeparation";
    case ErrorKind::NoFeasibleThreshold: return "NoFeasibleThreshold";
    case ErrorKind::NoFeasibleContract: return "NoFeasibleContract";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mhlti
