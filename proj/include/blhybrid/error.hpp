#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blhybrid {

enum class Errc {
  // ingest
  MissingColumn,
  UnparsableRow,
  DuplicateDate,
  EmptyFile,
  ZeroVariance,
  TooShort,
  NonPositivePrice,
  InvalidArgument,
  // ssa
  WindowOutOfRange,
  NoConvergence,
  IndexOutOfRank,
  // emd / maemd
  InsufficientExtrema,
  SupportMismatch,
  // tcn
  ShapeMismatch,
  EmptyDataset,
  DivergedLoss,
  // metrics
  LengthMismatch,
  ZeroActual,
  ZeroVarianceActual,
  // black-litterman
  DimensionMismatch,
  UnknownTicker,
  SingularMatrix,
  DegenerateWeights,
  TooFewObservations,
  // backtest
  InsufficientTestWindow,
  EmptyUniverse,
  MissingCap,
  ZeroVolatility,
  MisalignedRuns,
  // cli
  ConfigInvalid,
  MissingArtifact,
  StageFailed,
};

std::string_view to_string(Errc code) noexcept;

/// Broad failure class used to pick the CLI exit code.
enum class ErrorClass { Config, Data, Numerical };

ErrorClass classify(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Stage that raised the error, empty when not raised inside a pipeline.
  const std::string& stage() const noexcept { return stage_; }

  /// Copy of this error tagged with a pipeline stage name.
  Error with_stage(std::string stage) const {
    Error e(code_, "[" + stage + "] " + detail_);
    e.stage_ = std::move(stage);
    return e;
  }

 private:
  Errc code_;
  std::string detail_;
  std::string stage_;
};

}  // namespace blhybrid
