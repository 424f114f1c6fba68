#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "blhybrid/forecast.hpp"

namespace blhybrid::config {

/// Value of one key in the TOML subset: string, integer, float, bool or a
/// flat array of those.
struct Value;
using Array = std::vector<Value>;
struct Value {
  std::variant<std::string, std::int64_t, double, bool, Array> v;
};

/// Flat table keyed by "section.key" (top-level keys have no prefix).
using Table = std::map<std::string, Value>;

/// Parses `[section]` headers, `key = value` lines and `#` comments.
/// Throws Error(ConfigInvalid) naming the offending key or line.
Table parse_toml(std::string_view text);

struct BlSettings {
  double lambda = 2.5;
  double tau = 0.002;
  double rf_daily = 0.0;
  std::size_t lookback_days = 500;
};

struct BacktestSettings {
  std::vector<std::size_t> holding_periods{1, 3, 5, 10, 20};
  double cost_rate = 0.002;
};

struct RunConfig {
  std::filesystem::path data_dir;
  std::vector<std::string> tickers;  // empty: every OHLCV file in data_dir
  std::filesystem::path output_dir = "out";
  std::filesystem::path market_caps = "market_caps.csv";  // relative to data_dir
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  forecast::PipelineConfig pipeline;
  BlSettings bl;
  BacktestSettings backtest;
};

/// Builds a config from text; relative paths resolve against `base_dir`.
/// Absent keys keep their defaults; a key present with an empty or
/// ill-typed value is rejected.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Checks cross-field invariants and that referenced paths exist.
void validate(const RunConfig& cfg);

/// Tickers to process: the configured list, or every `*.csv` in data_dir
/// other than the market-cap file, sorted.
std::vector<std::string> resolve_tickers(const RunConfig& cfg);

}  // namespace blhybrid::config
