#include "csfdyn/error.hpp"

#include <fmt/format.h>

namespace csfdyn {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ValueOutOfRange: return "ValueOutOfRange";
    case Errc::IoFailure: return "IoFailure";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonUniformSampling: return "NonUniformSampling";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::WrongEncoding: return "WrongEncoding";
    case Errc::InvalidThreshold: return "InvalidThreshold";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ClockMismatch: return "ClockMismatch";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::UnpairedSubject: return "UnpairedSubject";
    case Errc::MissingInput: return "MissingInput";
    case Errc::UnitMismatch: return "UnitMismatch";
    case Errc::TooFewCycles: return "TooFewCycles";
    case Errc::ArrhythmicSignal: return "ArrhythmicSignal";
    case Errc::FlatSignal: return "FlatSignal";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::EmptyEnsemble: return "EmptyEnsemble";
    case Errc::DivisionByZeroSv: return "DivisionByZeroSv";
    case Errc::TooFewPairs: return "TooFewPairs";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::AllZeroDifferences: return "AllZeroDifferences";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

ErrorClass error_class(Errc code) noexcept {
  switch (code) {
    case Errc::TooFewCycles:
    case Errc::ArrhythmicSignal:
    case Errc::FlatSignal:
    case Errc::TooFewSamples:
    case Errc::EmptyEnsemble:
    case Errc::DivisionByZeroSv:
    case Errc::TooFewPairs:
    case Errc::ZeroVariance:
    case Errc::AllZeroDifferences:
    case Errc::NonFinite:
      return ErrorClass::Refusal;
    case Errc::InvariantViolation:
      return ErrorClass::Internal;
    default:
      return ErrorClass::Input;
  }
}

int exit_code(ErrorClass cls) noexcept {
  switch (cls) {
    case ErrorClass::Input: return 2;
    case ErrorClass::Refusal: return 3;
    case ErrorClass::Internal: return 4;
  }
  return 4;
}

namespace {
std::string compose(Errc code, const std::string& message, const std::string& stage) {
  if (stage.empty()) return fmt::format("{}: {}", to_string(code), message);
  return fmt::format("[{}] {}: {}", stage, to_string(code), message);
}
}  // namespace

Error::Error(Errc code, const std::string& message, std::string stage)
    : std::runtime_error(compose(code, message, stage)),
      code_(code),
      detail_(message),
      stage_(std::move(stage)) {}

Error Error::with_stage(std::string stage) const {
  if (!stage_.empty()) return *this;
  return Error(code_, detail_, std::move(stage));
}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace csfdyn
