#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csfdyn {

/// Every failure the library reports. Grouped by how the CLI maps them to
/// exit codes (see error_class).
enum class Errc {
  // input errors
  MalformedHeader,
  DimensionMismatch,
  ValueOutOfRange,
  IoFailure,
  MalformedRow,
  NonUniformSampling,
  EmptyMask,
  WrongEncoding,
  InvalidThreshold,
  InvalidArgument,
  ClockMismatch,
  InvalidSpec,
  UnpairedSubject,
  MissingInput,
  UnitMismatch,
  // processing refusals
  TooFewCycles,
  ArrhythmicSignal,
  FlatSignal,
  TooFewSamples,
  EmptyEnsemble,
  DivisionByZeroSv,
  TooFewPairs,
  ZeroVariance,
  AllZeroDifferences,
  NonFinite,
  // bugs
  InvariantViolation,
};

enum class ErrorClass { Input, Refusal, Internal };

std::string_view to_string(Errc code) noexcept;
ErrorClass error_class(Errc code) noexcept;

/// Process exit code for an error class: 2 input, 3 refusal, 4 internal.
int exit_code(ErrorClass cls) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string stage = {});

  Errc code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Copy of this error attributed to a pipeline stage. An existing stage
  /// is kept.
  Error with_stage(std::string stage) const;

 private:
  Errc code_;
  std::string detail_;
  std::string stage_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace csfdyn
