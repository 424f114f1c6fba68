#include "blhybrid/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "blhybrid/error.hpp"
#include "blhybrid/io.hpp"

namespace blhybrid {

namespace {

std::optional<int> parse_fixed_int(std::string_view s) {
  int v = 0;
  for (char c : s)
    if (c < '0' || c > '9') return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Date> try_parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto y = parse_fixed_int(text.substr(0, 4));
  auto m = parse_fixed_int(text.substr(5, 2));
  auto d = parse_fixed_int(text.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
            std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

}  // namespace

Date parse_date(std::string_view text) {
  auto d = try_parse_date(io::trim(text));
  if (!d) throw Error(Errc::UnparsableRow, "bad date '" + std::string(text) + "'");
  return *d;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string_view channel_name(Channel c) noexcept {
  switch (c) {
    case Channel::Open: return "open";
    case Channel::High: return "high";
    case Channel::Low: return "low";
    case Channel::Close: return "close";
    case Channel::Volume: return "volume";
  }
  return "?";
}

OhlcvFrame load_ohlcv(const std::filesystem::path& path) {
  return parse_ohlcv(io::read_file(path), path.stem().string());
}

OhlcvFrame parse_ohlcv(std::string_view text, std::string ticker) {
  const auto lines = io::split_lines(text);
  std::size_t line_idx = 0;
  while (line_idx < lines.size() && io::trim(lines[line_idx]).empty()) ++line_idx;
  if (line_idx == lines.size()) throw Error(Errc::EmptyFile, ticker);

  // Column positions in file order: date, then each channel.
  const auto header = io::split_fields(lines[line_idx]);
  auto find_col = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (io::to_lower(header[i]) == name) return i;
    throw Error(Errc::MissingColumn, std::string(name));
  };
  const std::size_t date_col = find_col("date");
  std::array<std::size_t, kNumChannels> cols{};
  for (auto c : kAllChannels) cols[static_cast<std::size_t>(c)] = find_col(channel_name(c));

  struct Row {
    Date date;
    std::array<double, kNumChannels> values;
  };
  std::vector<Row> rows;
  for (std::size_t i = line_idx + 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const std::string where = "line " + std::to_string(i + 1);
    auto fields = io::split_fields(lines[i]);
    if (fields.size() != header.size()) throw Error(Errc::UnparsableRow, where);
    auto date = try_parse_date(fields[date_col]);
    if (!date) throw Error(Errc::UnparsableRow, where);
    Row row{*date, {}};
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      auto v = io::parse_double(fields[cols[c]]);
      if (!v || !std::isfinite(*v)) throw Error(Errc::UnparsableRow, where);
      const bool is_volume = c == static_cast<std::size_t>(Channel::Volume);
      if (is_volume ? *v < 0.0 : *v <= 0.0)
        throw Error(Errc::UnparsableRow, where + ": out-of-range value");
      row.values[c] = *v;
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw Error(Errc::EmptyFile, ticker);

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].date == rows[i - 1].date)
      throw Error(Errc::DuplicateDate, format_date(rows[i].date));
  if (rows.size() < 2) throw Error(Errc::TooShort, ticker + ": need at least 2 rows");

  OhlcvFrame frame;
  frame.ticker = std::move(ticker);
  frame.dates.reserve(rows.size());
  for (auto& ch : frame.channels) ch.reserve(rows.size());
  for (const auto& r : rows) {
    frame.dates.push_back(r.date);
    for (std::size_t c = 0; c < kNumChannels; ++c) frame.channels[c].push_back(r.values[c]);
  }
  return frame;
}

std::string format_ohlcv(const OhlcvFrame& frame) {
  std::string out = "date,open,high,low,close,volume\n";
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out += format_date(frame.dates[i]);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      out += ',';
      out += io::format_double(frame.channels[c][i]);
    }
    out += '\n';
  }
  return out;
}

std::pair<OhlcvFrame, NormalizationParams> zscore_normalize(const OhlcvFrame& frame) {
  NormalizationParams params;
  OhlcvFrame out = frame;
  const double n = static_cast<double>(frame.size());
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto& x = frame.channels[c];
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0) || sd <= 1e-14 * std::max(1.0, std::abs(mean)))
      throw Error(Errc::ZeroVariance, std::string(channel_name(static_cast<Channel>(c))));
    params.mean[c] = mean;
    params.stddev[c] = sd;
    for (auto& v : out.channels[c]) v = (v - mean) / sd;
  }
  return {std::move(out), params};
}

std::vector<double> denormalize(std::span<const double> series, const NormalizationParams& params,
                                Channel channel) {
  const auto c = static_cast<std::size_t>(channel);
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i)
    out[i] = series[i] * params.stddev[c] + params.mean[c];
  return out;
}

std::vector<double> to_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw Error(Errc::TooShort, "need at least 2 prices");
  for (std::size_t i = 0; i < prices.size(); ++i)
    if (!(prices[i] > 0.0)) throw Error(Errc::NonPositivePrice, "index " + std::to_string(i));
  std::vector<double> r(prices.size() - 1);
  for (std::size_t t = 1; t < prices.size(); ++t) r[t - 1] = prices[t] / prices[t - 1] - 1.0;
  return r;
}

SplitRanges split(std::size_t series_length, const SplitSpec& spec) {
  if (!(spec.train_frac > 0 && spec.val_frac > 0 && spec.test_frac > 0) ||
      std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-12)
    throw Error(Errc::InvalidArgument, "split fractions must be positive and sum to 1");
  if (series_length < 10) throw Error(Errc::TooShort, "split needs at least 10 points");
  // Guard against 0.15 * 100 landing a hair below 15.
  auto part = [&](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(series_length) + 1e-9));
  };
  const std::size_t n_val = part(spec.val_frac);
  const std::size_t n_test = part(spec.test_frac);
  if (n_val == 0 || n_test == 0 || n_val + n_test >= series_length)
    throw Error(Errc::TooShort, "split leaves an empty range");
  const std::size_t n_train = series_length - n_val - n_test;
  return {{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, series_length}};
}

MarketCapTable load_market_caps(const std::filesystem::path& path) {
  return parse_market_caps(io::read_file(path));
}

MarketCapTable parse_market_caps(std::string_view text) {
  const auto lines = io::split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && io::trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw Error(Errc::EmptyFile, "market caps");
  const auto header = io::split_fields(lines[i]);
  auto find_col = [&](std::string_view name) -> std::size_t {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (io::to_lower(header[k]) == name) return k;
    throw Error(Errc::MissingColumn, std::string(name));
  };
  const auto dc = find_col("date"), tc = find_col("ticker"), mc = find_col("market_cap");
  MarketCapTable table;
  for (++i; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto fields = io::split_fields(lines[i]);
    const std::string where = "market caps line " + std::to_string(i + 1);
    if (fields.size() != header.size()) throw Error(Errc::UnparsableRow, where);
    auto d = try_parse_date(fields[dc]);
    auto cap = io::parse_double(fields[mc]);
    if (!d || !cap || !(*cap > 0.0)) throw Error(Errc::UnparsableRow, where);
    table[std::string(fields[tc])].emplace_back(*d, *cap);
  }
  for (auto& [ticker, hist] : table) {
    std::stable_sort(hist.begin(), hist.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 1; k < hist.size(); ++k)
      if (hist[k].first == hist[k - 1].first)
        throw Error(Errc::DuplicateDate, ticker + " " + format_date(hist[k].first));
  }
  return table;
}

double market_cap_at(const MarketCapTable& caps, const std::string& ticker, Date date) {
  auto it = caps.find(ticker);
  if (it == caps.end() || it->second.empty()) throw Error(Errc::MissingCap, ticker);
  const auto& hist = it->second;
  auto pos = std::upper_bound(hist.begin(), hist.end(), date,
                              [](Date d, const auto& entry) { return d < entry.first; });
  if (pos == hist.begin()) throw Error(Errc::MissingCap, ticker + " before " + format_date(date));
  return std::prev(pos)->second;
}

}  // namespace blhybrid
