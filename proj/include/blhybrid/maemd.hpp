#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "blhybrid/emd.hpp"
#include "blhybrid/ingest.hpp"

namespace blhybrid::maemd {

/// Distribution of spacings between consecutive (pooled) extrema of an IMF.
struct ExtremaIntervalDistribution {
  std::map<std::size_t, std::size_t> counts;  // interval -> occurrences N_x
  std::map<std::size_t, double> probs;        // interval -> probability
  std::size_t total_extrema = 0;              // N

  std::set<std::size_t> support() const;
};

inline constexpr double kLaplaceEpsilon = 1e-6;

/// Raw distribution: P(x) = N_x / (N - 1). Needs at least 3 pooled extrema.
ExtremaIntervalDistribution interval_distribution(std::span<const double> imf);

/// P'(x) = N_x / (N - 1) + eps on the own support, eps on the rest of
/// `extended_support`, then renormalized to sum to one.
ExtremaIntervalDistribution laplace_smooth(const ExtremaIntervalDistribution& dist,
                                           const std::set<std::size_t>& extended_support,
                                           double epsilon = kLaplaceEpsilon);

/// D(p || q) with natural log. Both must cover the same support.
double kld(const ExtremaIntervalDistribution& p, const ExtremaIntervalDistribution& q);

/// KLD of raw distributions after smoothing both over the union of supports.
double smoothed_kld(const ExtremaIntervalDistribution& related,
                    const ExtremaIntervalDistribution& target,
                    double epsilon = kLaplaceEpsilon);

inline constexpr std::array<Channel, 4> kRelatedChannels = {Channel::Open, Channel::High,
                                                            Channel::Low, Channel::Volume};

/// One related channel's contribution to a group.
struct ChannelSlot {
  Channel channel = Channel::Open;
  std::vector<std::size_t> imf_indices;        // 0-based indices into the channel's IMFs
  std::vector<std::optional<double>> kld;      // per index; empty when too sparse to score
  std::vector<double> series;                  // summed IMFs, or zeros
};

struct AlignedGroup {
  std::size_t target_index = 0;  // Close IMF index; equals the group index
  std::vector<double> target;
  std::array<ChannelSlot, 4> related;

  /// Five input channels for the predictor: target first, then O, H, L, V.
  std::array<std::vector<double>, kNumChannels> channels() const;
};

struct AlignedImfGroups {
  std::vector<AlignedGroup> groups;  // one per Close IMF
  AlignedGroup residual;             // Close residual with related residuals, no KLD
};

/// Assigns each related-channel IMF to the KLD-nearest Close IMF.
AlignedImfGroups align(const emd::ImfSet& target, const std::map<Channel, emd::ImfSet>& related);

}  // namespace blhybrid::maemd
