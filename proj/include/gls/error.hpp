#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gls {

/// Failure categories raised by the library. Every thrown gls::Error carries one.
enum class Errc {
  SupportMismatch,
  LengthMismatch,
  EmptyInput,
  LabelOutOfRange,
  InvalidDistribution,
  ShapeMismatch,
  EmptyAccumulator,
  SingularMatrix,
  DegenerateProblem,
  LambdaOutOfRange,
  ZeroSourceClass,
  StaleCache,
  OutOfRangeDiscriminatorOutput,
  BatchSizeMismatch,
  ConfigInvalid,
  DimensionMismatch,
  InvalidSpec,
  EmptyClassAfterSubsample,
  InvalidCount,
  MalformedConfusion,
  InsufficientSamples,
  DegenerateGamma,
  IoError,
  ParseError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gls
