#include "blhybrid/maemd.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "blhybrid/error.hpp"

namespace blhybrid::maemd {

std::set<std::size_t> ExtremaIntervalDistribution::support() const {
  std::set<std::size_t> s;
  for (const auto& [x, p] : probs) s.insert(x);
  return s;
}

ExtremaIntervalDistribution interval_distribution(std::span<const double> imf) {
  if (imf.size() < 3) throw Error(Errc::InsufficientExtrema, "series shorter than 3");
  const auto pooled = emd::find_extrema(imf).pooled();
  if (pooled.size() < 3)
    throw Error(Errc::InsufficientExtrema, std::to_string(pooled.size()) + " extrema");
  ExtremaIntervalDistribution d;
  d.total_extrema = pooled.size();
  for (std::size_t i = 1; i < pooled.size(); ++i) ++d.counts[pooled[i] - pooled[i - 1]];
  const double denom = static_cast<double>(d.total_extrema - 1);
  for (const auto& [x, n] : d.counts) d.probs[x] = static_cast<double>(n) / denom;
  return d;
}

ExtremaIntervalDistribution laplace_smooth(const ExtremaIntervalDistribution& dist,
                                           const std::set<std::size_t>& extended_support,
                                           double epsilon) {
  ExtremaIntervalDistribution out;
  out.counts = dist.counts;
  out.total_extrema = dist.total_extrema;
  for (const auto& [x, p] : dist.probs)
    if (!extended_support.contains(x))
      throw Error(Errc::SupportMismatch, "extended support misses interval " + std::to_string(x));
  double total = 0.0;
  for (auto x : extended_support) {
    auto it = dist.probs.find(x);
    const double p = (it != dist.probs.end() ? it->second : 0.0) + epsilon;
    out.probs[x] = p;
    total += p;
  }
  for (auto& [x, p] : out.probs) p /= total;
  return out;
}

double kld(const ExtremaIntervalDistribution& p, const ExtremaIntervalDistribution& q) {
  if (p.probs.size() != q.probs.size())
    throw Error(Errc::SupportMismatch, "distributions cover different supports");
  double d = 0.0;
  auto qi = q.probs.begin();
  for (const auto& [x, px] : p.probs) {
    if (qi->first != x) throw Error(Errc::SupportMismatch, "interval " + std::to_string(x));
    if (px > 0.0) d += px * std::log(px / qi->second);
    ++qi;
  }
  return std::max(d, 0.0);
}

double smoothed_kld(const ExtremaIntervalDistribution& related,
                    const ExtremaIntervalDistribution& target, double epsilon) {
  auto support = related.support();
  for (const auto& [x, p] : target.probs) support.insert(x);
  return kld(laplace_smooth(related, support, epsilon), laplace_smooth(target, support, epsilon));
}

std::array<std::vector<double>, kNumChannels> AlignedGroup::channels() const {
  return {target, related[0].series, related[1].series, related[2].series, related[3].series};
}

AlignedImfGroups align(const emd::ImfSet& target, const std::map<Channel, emd::ImfSet>& related) {
  if (target.imfs.empty()) throw Error(Errc::InvalidArgument, "target has no IMFs");
  const std::size_t n = target.residual.size();
  const std::size_t k = target.imfs.size();

  // Target IMFs too sparse to characterize are not candidates.
  std::vector<std::optional<ExtremaIntervalDistribution>> target_dists(k);
  for (std::size_t i = 0; i < k; ++i) {
    try {
      target_dists[i] = interval_distribution(target.imfs[i]);
    } catch (const Error& e) {
      if (e.code() != Errc::InsufficientExtrema) throw;
    }
  }

  AlignedImfGroups out;
  out.groups.resize(k);
  for (std::size_t g = 0; g < k; ++g) {
    out.groups[g].target_index = g;
    out.groups[g].target = target.imfs[g];
  }
  out.residual.target_index = k;
  out.residual.target = target.residual;

  for (std::size_t slot = 0; slot < kRelatedChannels.size(); ++slot) {
    const Channel ch = kRelatedChannels[slot];
    auto it = related.find(ch);
    if (it == related.end())
      throw Error(Errc::InvalidArgument,
                  "related channel " + std::string(channel_name(ch)) + " missing");
    const auto& set = it->second;
    if (set.residual.size() != n) throw Error(Errc::LengthMismatch, "related channel length");

    for (auto& group : out.groups) {
      group.related[slot].channel = ch;
      group.related[slot].series.assign(n, 0.0);
    }
    out.residual.related[slot] = {ch, {}, {}, set.residual};

    for (std::size_t j = 0; j < set.imfs.size(); ++j) {
      std::size_t best = k - 1;
      std::optional<double> best_score;
      try {
        const auto dist = interval_distribution(set.imfs[j]);
        for (std::size_t i = 0; i < k; ++i) {
          if (!target_dists[i]) continue;
          const double d = smoothed_kld(dist, *target_dists[i]);
          // <= prefers the later, lower-frequency target on ties.
          if (!best_score || d <= *best_score) {
            best_score = d;
            best = i;
          }
        }
      } catch (const Error& e) {
        if (e.code() != Errc::InsufficientExtrema) throw;
      }
      auto& dst = out.groups[best].related[slot];
      dst.imf_indices.push_back(j);
      dst.kld.push_back(best_score);
      for (std::size_t t = 0; t < n; ++t) dst.series[t] += set.imfs[j][t];
    }
  }
  return out;
}

}  // namespace blhybrid::maemd
