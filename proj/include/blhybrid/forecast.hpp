#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blhybrid/emd.hpp"
#include "blhybrid/exec.hpp"
#include "blhybrid/ingest.hpp"
#include "blhybrid/maemd.hpp"
#include "blhybrid/tcn.hpp"

namespace blhybrid::forecast {

inline constexpr std::size_t kMinFrameLength = 200;

struct PipelineConfig {
  bool use_ssa = true;
  std::size_t ssa_window = 0;  // 0 picks ssa::default_window
  double ssa_energy = 0.9;
  std::size_t omega = emd::kDefaultOmega;
  tcn::TcnConfig tcn;
  SplitSpec split;
  Exec exec = Exec::Parallel;
};

struct Metrics {
  double rmse = 0.0;
  double mape = 0.0;
  double r2 = 0.0;
};

double rmse(std::span<const double> actual, std::span<const double> predicted);
/// Mean absolute percentage error as a fraction.
double mape(std::span<const double> actual, std::span<const double> predicted);
double r2(std::span<const double> actual, std::span<const double> predicted);
Metrics evaluate(std::span<const double> actual, std::span<const double> predicted);

/// SSA-denoises every raw channel; a plain copy when use_ssa is off.
OhlcvFrame denoise_frame(const OhlcvFrame& frame, const PipelineConfig& cfg);

struct Decomposition {
  NormalizationParams norm;
  std::map<Channel, emd::ImfSet> imfs;
};

/// Z-scores the (denoised) frame and runs EMD on each channel.
Decomposition decompose_frame(const OhlcvFrame& denoised, const PipelineConfig& cfg);

/// When Close has no IMFs only the residual group is filled, its related
/// series being the full normalized channels.
maemd::AlignedImfGroups align_decomposition(const Decomposition& d);

/// Groups in prediction order: one per Close IMF, then the residual group.
std::vector<const maemd::AlignedGroup*> ordered_groups(const maemd::AlignedImfGroups& g);

std::string group_name(std::size_t index, std::size_t imf_groups);

/// Seed for one group's network, stable across runs and platforms.
std::uint64_t group_seed(std::uint64_t seed, const std::string& ticker, std::size_t group);

struct GroupModel {
  std::string name;
  std::optional<tcn::TcnModel> model;  // empty: persistence forecast
  std::size_t best_epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::string warning;
};

GroupModel train_group(const maemd::AlignedGroup& group, std::size_t index, std::size_t imf_groups,
                       const SplitRanges& ranges, const PipelineConfig& cfg,
                       const std::string& ticker);

struct GroupForecast {
  std::string name;
  std::vector<double> val_predicted;   // normalized units
  std::vector<double> test_predicted;
  std::vector<double> test_actual;     // the group's own target
  double test_rmse = 0.0;
  std::optional<double> test_r2;       // empty when the target is flat
  bool persistence = false;
};

GroupForecast predict_group(const maemd::AlignedGroup& group, const GroupModel& model,
                            const SplitRanges& ranges, std::size_t window, Exec exec);

struct ForecastResult {
  std::string ticker;
  SplitRanges ranges;
  std::vector<Date> val_dates;
  std::vector<Date> test_dates;
  std::vector<double> val_predicted;  // price units
  std::vector<double> val_actual;     // raw close
  std::vector<double> test_predicted;
  std::vector<double> test_actual;
  Metrics metrics;                    // test range, against raw close
  std::vector<GroupForecast> groups;
  std::vector<std::string> warnings;
};

/// Sums group forecasts, denormalizes Close and scores against the raw frame.
ForecastResult assemble(const OhlcvFrame& raw, const NormalizationParams& norm,
                        const SplitRanges& ranges, std::vector<GroupForecast> groups,
                        std::vector<std::string> warnings);

/// Full pipeline for one asset. Errors carry the failing stage name.
ForecastResult predict_stock(const OhlcvFrame& frame, const PipelineConfig& cfg);

std::string to_json(const ForecastResult& r);
/// `date,split,actual,predicted` over the validation and test ranges.
std::string to_csv(const ForecastResult& r);

}  // namespace blhybrid::forecast
