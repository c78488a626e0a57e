#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace erot {

enum class ErrorCode {
  NegativeWeight,
  MassMismatch,
  SpaceMismatch,
  OrderOutOfRange,
  EmptySample,
  IndexOutOfRange,
  InvalidFamilyParams,
  MissingCoordinates,
  SeparabilityViolated,
  NonConvergence,
  NumericOverflow,
  MarginalMismatch,
  AsymmetricSetup,
  TooLarge,
  ZeroMassAtom,
  ContractionViolated,
  UnboundedXVariation,
  NotInTangentCone,
  NonUniquePotentials,
  EmptyInput,
  ConfigParse,
  UnknownSubcommand,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::MassMismatch: return "MassMismatch";
    case ErrorCode::SpaceMismatch: return "SpaceMismatch";
    case ErrorCode::OrderOutOfRange: return "OrderOutOfRange";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidFamilyParams: return "InvalidFamilyParams";
    case ErrorCode::MissingCoordinates: return "MissingCoordinates";
    case ErrorCode::SeparabilityViolated: return "SeparabilityViolated";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NumericOverflow: return "NumericOverflow";
    case ErrorCode::MarginalMismatch: return "MarginalMismatch";
    case ErrorCode::AsymmetricSetup: return "AsymmetricSetup";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ZeroMassAtom: return "ZeroMassAtom";
    case ErrorCode::ContractionViolated: return "ContractionViolated";
    case ErrorCode::UnboundedXVariation: return "UnboundedXVariation";
    case ErrorCode::NotInTangentCone: return "NotInTangentCone";
    case ErrorCode::NonUniquePotentials: return "NonUniquePotentials";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace erot
