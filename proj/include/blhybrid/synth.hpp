#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blhybrid/ingest.hpp"

namespace blhybrid::synth {

/// Multi-asset OHLCV generator: trend plus three sinusoids (slow, mid, fast)
/// plus white noise on the close.
struct SynthSpec {
  std::size_t assets = 8;
  std::size_t days = 900;
  std::uint64_t seed = 7;
  /// Ratio of sinusoid power to noise power; noise is off when `noise` is false.
  double snr_db = 10.0;
  bool noise = true;
  double trend_drift = 0.08;  // total drift over the sample, as a fraction of the base price
  double slow_amplitude = 0.05;
  double mid_amplitude = 0.035;
  double fast_amplitude = 0.03;
  Date start{std::chrono::year{2019}, std::chrono::month{1}, std::chrono::day{2}};
};

struct SynthAsset {
  OhlcvFrame frame;
  std::vector<double> clean_close;
  std::vector<double> fast_component;  // the fast sinusoid alone
  std::vector<double> market_cap;
};

std::vector<SynthAsset> generate(const SynthSpec& spec);

/// Weekdays from `start`, `count` of them.
std::vector<Date> business_days(Date start, std::size_t count);

std::string format_market_caps(const std::vector<SynthAsset>& assets);

/// Writes `<ticker>.csv` per asset and `market_caps.csv` into `dir`.
void write_dataset(const std::filesystem::path& dir, const std::vector<SynthAsset>& assets);

}  // namespace blhybrid::synth
