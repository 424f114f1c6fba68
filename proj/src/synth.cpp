#include "blhybrid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "blhybrid/error.hpp"
#include "blhybrid/io.hpp"

namespace blhybrid::synth {

std::vector<Date> business_days(Date start, std::size_t count) {
  using namespace std::chrono;
  std::vector<Date> out;
  sys_days d{start};
  while (out.size() < count) {
    const weekday wd{d};
    if (wd != Saturday && wd != Sunday) out.emplace_back(d);
    d += days{1};
  }
  return out;
}

std::vector<SynthAsset> generate(const SynthSpec& spec) {
  if (spec.assets == 0 || spec.days < 2)
    throw Error(Errc::InvalidArgument, "need at least one asset and two days");
  const auto dates = business_days(spec.start, spec.days);
  const double n = static_cast<double>(spec.days);
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<SynthAsset> out;
  for (std::size_t a = 0; a < spec.assets; ++a) {
    std::mt19937_64 rng(spec.seed * 1000003ULL + a);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const double base = 40.0 + 120.0 * u(rng);
    const double drift = spec.trend_drift * (u(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + u(rng));
    const double periods[3] = {150.0 + 150.0 * u(rng), 30.0 + 40.0 * u(rng), 6.0 + 8.0 * u(rng)};
    const double amps[3] = {spec.slow_amplitude, spec.mid_amplitude, spec.fast_amplitude};
    double phases[3];
    for (double& p : phases) p = two_pi * u(rng);

    SynthAsset asset;
    asset.frame.ticker = "SYN" + std::to_string(a + 1);
    asset.frame.dates = dates;
    std::vector<double> osc(spec.days);
    asset.clean_close.resize(spec.days);
    asset.fast_component.resize(spec.days);
    double osc_power = 0.0;
    for (std::size_t t = 0; t < spec.days; ++t) {
      const double td = static_cast<double>(t);
      double s = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double v = base * amps[k] * std::sin(two_pi * td / periods[k] + phases[k]);
        s += v;
        if (k == 2) asset.fast_component[t] = v;
      }
      osc[t] = s;
      osc_power += s * s;
      asset.clean_close[t] = base * (1.0 + drift * td / n) + s;
    }
    osc_power /= n;
    const double sigma =
        spec.noise ? std::sqrt(osc_power / std::pow(10.0, spec.snr_db / 10.0)) : 0.0;

    auto& f = asset.frame;
    for (auto& ch : f.channels) ch.resize(spec.days);
    const double vbase = 1e6 * (1.0 + 4.0 * u(rng));
    const double osc_scale = base * (amps[0] + amps[1] + amps[2]);
    const double shares = 1e7 * (1.0 + 9.0 * u(rng));
    for (std::size_t t = 0; t < spec.days; ++t) {
      const double close = asset.clean_close[t] + sigma * gauss(rng);
      const double prev = t == 0 ? asset.clean_close[0] : f[Channel::Close][t - 1];
      const double open = prev + 0.3 * sigma * gauss(rng);
      const double wick = 0.002 * base + 0.5 * sigma;
      f[Channel::Open][t] = open;
      f[Channel::Close][t] = close;
      f[Channel::High][t] = std::max(open, close) + wick * std::abs(gauss(rng));
      f[Channel::Low][t] = std::min(open, close) - wick * std::abs(gauss(rng));
      const double swing = 0.4 * osc[t] / osc_scale;
      const double vnoise = spec.noise ? 0.1 * gauss(rng) : 0.0;
      f[Channel::Volume][t] = std::round(vbase * std::exp(swing + vnoise));
      asset.market_cap.push_back(shares * close);
    }
    for (Channel c : {Channel::Open, Channel::High, Channel::Low, Channel::Close})
      for (double v : f[c])
        if (!(v > 0.0)) throw Error(Errc::NonPositivePrice, "generator produced a price <= 0");
    out.push_back(std::move(asset));
  }
  return out;
}

std::string format_market_caps(const std::vector<SynthAsset>& assets) {
  std::string out = "date,ticker,market_cap\n";
  if (assets.empty()) return out;
  for (std::size_t t = 0; t < assets.front().frame.size(); ++t)
    for (const auto& a : assets)
      out += format_date(a.frame.dates[t]) + "," + a.frame.ticker + "," +
             io::format_double(a.market_cap[t]) + "\n";
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SynthAsset>& assets) {
  std::filesystem::create_directories(dir);
  for (const auto& a : assets) io::write_file_atomic(dir / (a.frame.ticker + ".csv"), format_ohlcv(a.frame));
  io::write_file_atomic(dir / "market_caps.csv", format_market_caps(assets));
}

}  // namespace blhybrid::synth
