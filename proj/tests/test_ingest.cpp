#include <doctest.h>
#include <fstream>

#include "blhybrid/error.hpp"
#include "blhybrid/ingest.hpp"
#include "helpers.hpp"

using namespace blhybrid;
using testutil::error_of;

namespace {

const char* kGood =
    "Date,Open,High,Low,Close,Volume\n"
    "2020-01-03,2,3,1,2.5,100\n"
    "2020-01-02,1,2,0.5,1.5,200\n"
    "2020-01-06,3,4,2,3.5,0\n";

OhlcvFrame frame_of(std::vector<double> close) {
  OhlcvFrame f;
  f.ticker = "X";
  for (std::size_t i = 0; i < close.size(); ++i) {
    f.dates.push_back(parse_date("2020-01-01"));
    for (Channel c : kAllChannels) f[c].push_back(close[i] + static_cast<double>(c));
  }
  return f;
}

}  // namespace

TEST_CASE("load_ohlcv parses, sorts and names the frame") {
  const auto f = parse_ohlcv(kGood, "ABC");
  REQUIRE(f.size() == 3);
  CHECK(f.ticker == "ABC");
  CHECK(format_date(f.dates[0]) == "2020-01-02");
  CHECK(f.dates[0] < f.dates[1]);
  CHECK(f.dates[1] < f.dates[2]);
  CHECK(f[Channel::Close][0] == 1.5);
  CHECK(f[Channel::Volume][2] == 0.0);

  const auto dir = testutil::temp_dir("ingest");
  std::ofstream(dir / "MSFT.csv") << kGood;
  CHECK(load_ohlcv(dir / "MSFT.csv").ticker == "MSFT");
}

TEST_CASE("load_ohlcv contract cases") {
  CHECK(error_of([] { parse_ohlcv("date,open,high,low,adj close,volume\n2020-01-02,1,1,1,1,1\n", "x"); }) ==
        Errc::MissingColumn);
  CHECK(error_of([] {
          parse_ohlcv("date,open,high,low,close,volume\n2020-01-02,1,1,1,1,1\n2020-01-02,1,1,1,1,1\n", "x");
        }) == Errc::DuplicateDate);
  CHECK(error_of([] { parse_ohlcv("", "x"); }) == Errc::EmptyFile);
  CHECK(error_of([] { parse_ohlcv("date,open,high,low,close,volume\n", "x"); }) == Errc::EmptyFile);
  CHECK(error_of([] { parse_ohlcv("date,open,high,low,close,volume\n01/02/2020,1,1,1,1,1\n", "x"); }) ==
        Errc::UnparsableRow);
  CHECK(error_of([] {
          parse_ohlcv("date,open,high,low,close,volume\n2020-01-02,1,1,1,-1,1\n2020-01-03,1,1,1,1,1\n", "x");
        }) == Errc::UnparsableRow);
  CHECK(error_of([] { parse_date("2020-02-30"); }) == Errc::UnparsableRow);
  CHECK(error_of([] { parse_date("2020-1-02"); }) == Errc::UnparsableRow);
}

TEST_CASE("format_ohlcv reloads bit-exactly") {
  auto f = frame_of(testutil::gaussian(5, 1));
  for (auto& ch : f.channels)
    for (auto& v : ch) v = std::abs(v) + 0.1;
  for (std::size_t i = 0; i < f.size(); ++i)
    f.dates[i] = std::chrono::sys_days{parse_date("2021-03-01")} + std::chrono::days{static_cast<int>(i)};
  const auto g = parse_ohlcv(format_ohlcv(f), "X");
  CHECK(g.channels == f.channels);
  CHECK(g.dates == f.dates);
}

TEST_CASE("zscore_normalize") {
  OhlcvFrame f = frame_of({1, 2, 3});
  auto [z, p] = zscore_normalize(f);
  CHECK(z[Channel::Open][0] == doctest::Approx(-std::sqrt(1.5)));
  CHECK(p.mean[0] == doctest::Approx(2.0));
  CHECK(p.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));

  // population std is exactly 1, so the scores are exactly -1 and 1
  OhlcvFrame g = frame_of({1, 1, 3, 3});
  auto [zg, pg] = zscore_normalize(g);
  CHECK(zg[Channel::Open] == std::vector<double>{-1, -1, 1, 1});
  CHECK(pg.mean[0] == 2.0);
  CHECK(pg.stddev[0] == 1.0);

  OhlcvFrame c = frame_of({5, 5, 5});
  CHECK(error_of([&] { zscore_normalize(c); }) == Errc::ZeroVariance);
}

TEST_CASE("normalize then denormalize is the identity; moments are 0 and 1") {
  auto f = frame_of(testutil::gaussian(200, 9, 10.0));
  for (std::uint64_t s = 0; s < 5; ++s) f[static_cast<Channel>(s)] = testutil::gaussian(200, 100 + s, 3.0 + s);
  auto [z, p] = zscore_normalize(f);
  for (Channel c : kAllChannels) {
    double m = 0, ss = 0;
    for (double v : z[c]) m += v;
    m /= 200.0;
    for (double v : z[c]) ss += (v - m) * (v - m);
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(std::sqrt(ss / 200.0) - 1.0) < 1e-10);
    CHECK(testutil::max_abs_diff(denormalize(z[c], p, c), f[c]) < 1e-10);
  }
  NormalizationParams q;
  q.mean[3] = 3;
  q.stddev[3] = 2;
  CHECK(denormalize(std::vector<double>{0, 0}, q, Channel::Close) == std::vector<double>{3, 3});
}

TEST_CASE("to_returns") {
  auto r = to_returns(std::vector<double>{100, 110});
  CHECK(r[0] == doctest::Approx(0.10));
  CHECK(to_returns(std::vector<double>{100, 100, 100}) == std::vector<double>{0, 0});
  r = to_returns(std::vector<double>{100, 90, 99});
  CHECK(r[0] == doctest::Approx(-0.10));
  CHECK(r[1] == doctest::Approx(0.10));
  CHECK(error_of([] { to_returns(std::vector<double>{1}); }) == Errc::TooShort);
  CHECK(error_of([] { to_returns(std::vector<double>{1, 0}); }) == Errc::NonPositivePrice);

  std::vector<double> geo{50};
  for (int i = 0; i < 100; ++i) geo.push_back(geo.back() * 1.013);
  for (double x : to_returns(geo)) CHECK(std::abs(x - 0.013) < 1e-12);
}

TEST_CASE("split") {
  auto s = split(100, {});
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 15);
  CHECK(s.test.size() == 15);
  s = split(10, {});
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
  CHECK(error_of([] { split(9, {}); }) == Errc::TooShort);
  for (std::size_t n = 10; n < 2000; n += 7) {
    const auto r = split(n, {});
    CHECK(r.train.begin == 0);
    CHECK(r.train.end == r.val.begin);
    CHECK(r.val.end == r.test.begin);
    CHECK(r.test.end == n);
    CHECK(r.val.size() == static_cast<std::size_t>(std::floor(0.15 * n + 1e-9)));
  }
}

TEST_CASE("market caps sidecar") {
  const auto t = parse_market_caps(
      "date,ticker,market_cap\n2020-01-03,A,20\n2020-01-02,A,10\n2020-01-02,B,5\n");
  CHECK(market_cap_at(t, "A", parse_date("2020-01-02")) == 10);
  CHECK(market_cap_at(t, "A", parse_date("2020-01-10")) == 20);
  CHECK(error_of([&] { market_cap_at(t, "C", parse_date("2020-01-02")); }) == Errc::MissingCap);
  CHECK(error_of([&] { market_cap_at(t, "B", parse_date("2020-01-01")); }) == Errc::MissingCap);
}
