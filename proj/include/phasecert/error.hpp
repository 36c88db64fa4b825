#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phasecert {

enum class ErrorCode {
  NotHermitian,
  NotDefinite,
  ConvergenceFailure,
  ZeroMatrix,
  NotQuasiSectorial,
  DegenerateRotation,
  DimensionMismatch,
  InvalidStructure,
  SolverStall,
  NonSimpleEigenvalue,
  IllConditionedPair,
  SingularScattering,
  FrequencyAtPole,
  InvalidParameter,
  IllPosed,
  StructureViolation,
  CertificateFailure,
  CalibrationFailure,
  ParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotDefinite: return "NotDefinite";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::NotQuasiSectorial: return "NotQuasiSectorial";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidStructure: return "InvalidStructure";
    case ErrorCode::SolverStall: return "SolverStall";
    case ErrorCode::NonSimpleEigenvalue: return "NonSimpleEigenvalue";
    case ErrorCode::IllConditionedPair: return "IllConditionedPair";
    case ErrorCode::SingularScattering: return "SingularScattering";
    case ErrorCode::FrequencyAtPole: return "FrequencyAtPole";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::IllPosed: return "IllPosed";
    case ErrorCode::StructureViolation: return "StructureViolation";
    case ErrorCode::CertificateFailure: return "CertificateFailure";
    case ErrorCode::CalibrationFailure: return "CalibrationFailure";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace phasecert
