#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace blhybrid::emd {

struct ExtremaIndex {
  std::vector<std::size_t> maxima;
  std::vector<std::size_t> minima;

  std::size_t count() const noexcept { return maxima.size() + minima.size(); }
  /// Maxima and minima merged in index order.
  std::vector<std::size_t> pooled() const;
};

struct ImfSet {
  std::vector<std::vector<double>> imfs;
  std::vector<double> residual;

  /// Sum of every IMF plus the residual.
  std::vector<double> reconstruct() const;
};

struct SiftOptions {
  std::size_t max_sift_iterations = 50;
  /// max |envelope mean| allowed, relative to max |candidate|.
  double mean_tolerance = 0.05;
};

inline constexpr std::size_t kDefaultOmega = 20;

/// Interior local extrema; a plateau counts once, at its first index.
ExtremaIndex find_extrema(std::span<const double> series);

/// Sign changes between consecutive nonzero samples.
std::size_t count_zero_crossings(std::span<const double> series);

/// Mean of the natural cubic spline envelopes through the maxima and minima,
/// each extended by mirroring its two outermost points across the series ends.
std::vector<double> envelope_mean(std::span<const double> series, const ExtremaIndex& extrema);

/// x - envelope_mean(x). A flat series has itself as both envelopes.
std::vector<double> sift_once(std::span<const double> series);

bool is_imf(std::span<const double> candidate, const SiftOptions& options = {});

/// Extracts IMFs until the residual has fewer than `omega` extrema.
ImfSet decompose(std::span<const double> series, std::size_t omega = kDefaultOmega,
                 const SiftOptions& options = {});

/// Natural cubic spline through (xs, ys), evaluated at 0, 1, ..., n - 1.
std::vector<double> natural_spline(std::span<const double> xs, std::span<const double> ys,
                                   std::size_t n);

}  // namespace blhybrid::emd
