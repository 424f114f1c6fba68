#include "blhybrid/emd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blhybrid/error.hpp"

namespace blhybrid::emd {

std::vector<std::size_t> ExtremaIndex::pooled() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  std::merge(maxima.begin(), maxima.end(), minima.begin(), minima.end(),
             std::back_inserter(out));
  return out;
}

std::vector<double> ImfSet::reconstruct() const {
  std::vector<double> out = residual;
  for (const auto& imf : imfs)
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += imf[t];
  return out;
}

ExtremaIndex find_extrema(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 3) throw Error(Errc::TooShort, "extrema need at least 3 samples");
  ExtremaIndex out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const bool rising = x[i - 1] < x[i];
    const bool falling = x[i - 1] > x[i];
    if (!rising && !falling) continue;
    std::size_t j = i + 1;
    while (j < n && x[j] == x[i]) ++j;
    if (j == n) break;
    if (rising && x[j] < x[i]) out.maxima.push_back(i);
    if (falling && x[j] > x[i]) out.minima.push_back(i);
  }
  return out;
}

std::size_t count_zero_crossings(std::span<const double> x) {
  std::size_t crossings = 0;
  int last_sign = 0;
  for (double v : x) {
    const int sign = (v > 0) - (v < 0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) ++crossings;
    last_sign = sign;
  }
  return crossings;
}

std::vector<double> natural_spline(std::span<const double> xs, std::span<const double> ys,
                                   std::size_t n) {
  const std::size_t m = xs.size();
  if (m < 2 || ys.size() != m) throw Error(Errc::InvalidArgument, "spline needs >= 2 knots");
  std::vector<double> second(m, 0.0);
  if (m > 2) {
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    std::vector<double> rhs(m, 0.0), upper(m, 0.0);
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
      const double a = h0, b = 2.0 * (h0 + h1), c = h1;
      const double d = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
      const double denom = b - a * upper[i - 1];
      upper[i] = c / denom;
      rhs[i] = (d - a * rhs[i - 1]) / denom;
    }
    for (std::size_t i = m - 2; i >= 1; --i) {
      second[i] = rhs[i] - upper[i] * second[i + 1];
      if (i == 1) break;
    }
  }
  std::vector<double> out(n);
  std::size_t seg = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double x = static_cast<double>(t);
    while (seg + 2 < m && x > xs[seg + 1]) ++seg;
    const double h = xs[seg + 1] - xs[seg];
    const double a = (xs[seg + 1] - x) / h;
    const double b = (x - xs[seg]) / h;
    out[t] = a * ys[seg] + b * ys[seg + 1] +
             ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * h * h / 6.0;
  }
  return out;
}

namespace {

std::vector<double> envelope(std::span<const double> series, const std::vector<std::size_t>& idx) {
  const std::size_t n = series.size();
  const double last = static_cast<double>(n - 1);
  const std::size_t k = idx.size();
  std::vector<double> xs, ys;
  xs.reserve(k + 4);
  ys.reserve(k + 4);
  for (std::size_t j : {std::size_t{1}, std::size_t{0}}) {
    xs.push_back(-static_cast<double>(idx[j]));
    ys.push_back(series[idx[j]]);
  }
  for (auto i : idx) {
    xs.push_back(static_cast<double>(i));
    ys.push_back(series[i]);
  }
  for (std::size_t j : {k - 1, k - 2}) {
    xs.push_back(2.0 * last - static_cast<double>(idx[j]));
    ys.push_back(series[idx[j]]);
  }
  return natural_spline(xs, ys, n);
}

bool is_flat(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

}  // namespace

std::vector<double> envelope_mean(std::span<const double> series, const ExtremaIndex& extrema) {
  if (extrema.maxima.size() < 2 || extrema.minima.size() < 2)
    throw Error(Errc::InsufficientExtrema,
                std::to_string(extrema.maxima.size()) + " maxima, " +
                    std::to_string(extrema.minima.size()) + " minima");
  const auto upper = envelope(series, extrema.maxima);
  const auto lower = envelope(series, extrema.minima);
  std::vector<double> mean(series.size());
  for (std::size_t t = 0; t < mean.size(); ++t) mean[t] = 0.5 * (upper[t] + lower[t]);
  return mean;
}

std::vector<double> sift_once(std::span<const double> series) {
  if (!series.empty() && is_flat(series)) return std::vector<double>(series.size(), 0.0);
  const auto mean = envelope_mean(series, find_extrema(series));
  std::vector<double> h(series.size());
  for (std::size_t t = 0; t < h.size(); ++t) h[t] = series[t] - mean[t];
  return h;
}

bool is_imf(std::span<const double> candidate, const SiftOptions& options) {
  if (candidate.size() < 3) return false;
  const auto extrema = find_extrema(candidate);
  const auto crossings = count_zero_crossings(candidate);
  const auto diff = extrema.count() > crossings ? extrema.count() - crossings
                                                : crossings - extrema.count();
  if (diff > 1) return false;
  double peak = 0.0;
  for (double v : candidate) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return false;
  try {
    const auto mean = envelope_mean(candidate, extrema);
    double worst = 0.0;
    for (double v : mean) worst = std::max(worst, std::abs(v));
    return worst <= options.mean_tolerance * peak;
  } catch (const Error& e) {
    if (e.code() == Errc::InsufficientExtrema) return false;
    throw;
  }
}

ImfSet decompose(std::span<const double> series, std::size_t omega, const SiftOptions& options) {
  if (series.size() < 10) throw Error(Errc::TooShort, "decompose needs at least 10 samples");
  if (omega < 4) throw Error(Errc::InvalidArgument, "omega must be at least 4");
  constexpr std::size_t kMaxImfs = 64;

  ImfSet out;
  out.residual.assign(series.begin(), series.end());
  while (find_extrema(out.residual).count() >= omega) {
    if (out.imfs.size() == kMaxImfs)
      throw Error(Errc::NoConvergence, "more than 64 IMFs extracted");
    std::vector<double> h = out.residual;
    for (std::size_t it = 0; it < options.max_sift_iterations; ++it) {
      try {
        h = sift_once(h);
      } catch (const Error& e) {
        if (e.code() != Errc::InsufficientExtrema) throw;
        break;
      }
      if (is_imf(h, options)) break;
    }
    for (std::size_t t = 0; t < h.size(); ++t) out.residual[t] -= h[t];
    out.imfs.push_back(std::move(h));
  }
  return out;
}

}  // namespace blhybrid::emd
