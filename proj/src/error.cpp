#include "gls/error.hpp"

namespace gls {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::SupportMismatch: return "SupportMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyAccumulator: return "EmptyAccumulator";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::DegenerateProblem: return "DegenerateProblem";
    case Errc::LambdaOutOfRange: return "LambdaOutOfRange";
    case Errc::ZeroSourceClass: return "ZeroSourceClass";
    case Errc::StaleCache: return "StaleCache";
    case Errc::OutOfRangeDiscriminatorOutput: return "OutOfRangeDiscriminatorOutput";
    case Errc::BatchSizeMismatch: return "BatchSizeMismatch";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::EmptyClassAfterSubsample: return "EmptyClassAfterSubsample";
    case Errc::InvalidCount: return "InvalidCount";
    case Errc::MalformedConfusion: return "MalformedConfusion";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::DegenerateGamma: return "DegenerateGamma";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace gls
