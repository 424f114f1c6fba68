#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace blhybrid {

using Date = std::chrono::year_month_day;

/// Parses a strict ISO-8601 `YYYY-MM-DD` date. Throws Error(UnparsableRow).
Date parse_date(std::string_view text);
std::string format_date(Date d);

enum class Channel : std::size_t { Open = 0, High = 1, Low = 2, Close = 3, Volume = 4 };
inline constexpr std::size_t kNumChannels = 5;
inline constexpr std::array<Channel, kNumChannels> kAllChannels = {
    Channel::Open, Channel::High, Channel::Low, Channel::Close, Channel::Volume};

std::string_view channel_name(Channel c) noexcept;

/// Daily OHLCV series for one asset.
struct OhlcvFrame {
  std::string ticker;
  std::vector<Date> dates;
  std::array<std::vector<double>, kNumChannels> channels;

  std::size_t size() const noexcept { return dates.size(); }
  std::vector<double>& operator[](Channel c) { return channels[static_cast<std::size_t>(c)]; }
  const std::vector<double>& operator[](Channel c) const {
    return channels[static_cast<std::size_t>(c)];
  }
};

struct NormalizationParams {
  std::array<double, kNumChannels> mean{};
  std::array<double, kNumChannels> stddev{};
};

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
};

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

struct SplitRanges {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

/// Loads `date,open,high,low,close,volume` CSV (header case-insensitive, extra
/// columns ignored). The ticker is the file stem.
OhlcvFrame load_ohlcv(const std::filesystem::path& path);

/// Parses CSV text; `ticker` names the resulting frame.
OhlcvFrame parse_ohlcv(std::string_view text, std::string ticker);

/// Writes a frame in the same layout `load_ohlcv` reads. Values use
/// shortest round-trip formatting so a reload is bit-exact.
std::string format_ohlcv(const OhlcvFrame& frame);

/// Z-score normalization with population standard deviation.
std::pair<OhlcvFrame, NormalizationParams> zscore_normalize(const OhlcvFrame& frame);

std::vector<double> denormalize(std::span<const double> series, const NormalizationParams& params,
                                Channel channel);

/// Simple returns p_t / p_{t-1} - 1.
std::vector<double> to_returns(std::span<const double> prices);

SplitRanges split(std::size_t series_length, const SplitSpec& spec);

/// Market-cap sidecar: `date,ticker,market_cap`, keyed by ticker, each
/// history sorted by date.
using MarketCapTable = std::map<std::string, std::vector<std::pair<Date, double>>>;

MarketCapTable load_market_caps(const std::filesystem::path& path);
MarketCapTable parse_market_caps(std::string_view text);

/// Latest cap on or before `date`. Throws Error(MissingCap).
double market_cap_at(const MarketCapTable& caps, const std::string& ticker, Date date);

}  // namespace blhybrid
