#include "blhybrid/error.hpp"

namespace blhybrid {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::UnparsableRow: return "UnparsableRow";
    case Errc::DuplicateDate: return "DuplicateDate";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::TooShort: return "TooShort";
    case Errc::NonPositivePrice: return "NonPositivePrice";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::WindowOutOfRange: return "WindowOutOfRange";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::IndexOutOfRank: return "IndexOutOfRank";
    case Errc::InsufficientExtrema: return "InsufficientExtrema";
    case Errc::SupportMismatch: return "SupportMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ZeroActual: return "ZeroActual";
    case Errc::ZeroVarianceActual: return "ZeroVarianceActual";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::UnknownTicker: return "UnknownTicker";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::DegenerateWeights: return "DegenerateWeights";
    case Errc::TooFewObservations: return "TooFewObservations";
    case Errc::InsufficientTestWindow: return "InsufficientTestWindow";
    case Errc::EmptyUniverse: return "EmptyUniverse";
    case Errc::MissingCap: return "MissingCap";
    case Errc::ZeroVolatility: return "ZeroVolatility";
    case Errc::MisalignedRuns: return "MisalignedRuns";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MissingArtifact: return "MissingArtifact";
    case Errc::StageFailed: return "StageFailed";
  }
  return "Unknown";
}

ErrorClass classify(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigInvalid:
    case Errc::InvalidArgument:
      return ErrorClass::Config;
    case Errc::MissingColumn:
    case Errc::UnparsableRow:
    case Errc::DuplicateDate:
    case Errc::EmptyFile:
    case Errc::TooShort:
    case Errc::NonPositivePrice:
    case Errc::UnknownTicker:
    case Errc::MissingCap:
    case Errc::EmptyUniverse:
    case Errc::MissingArtifact:
    case Errc::InsufficientTestWindow:
    case Errc::MisalignedRuns:
    case Errc::LengthMismatch:
    case Errc::ZeroActual:
      return ErrorClass::Data;
    default:
      return ErrorClass::Numerical;
  }
}

}  // namespace blhybrid
