#include "blhybrid/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "blhybrid/error.hpp"
#include "blhybrid/io.hpp"
#include "blhybrid/ssa.hpp"

namespace blhybrid::forecast {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> p) {
  if (a.size() != p.size() || a.empty())
    throw Error(Errc::LengthMismatch, std::to_string(a.size()) + " actual vs " +
                                          std::to_string(p.size()) + " predicted");
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

std::vector<double> slice(const std::vector<double>& v, IndexRange r) {
  return {v.begin() + static_cast<std::ptrdiff_t>(r.begin),
          v.begin() + static_cast<std::ptrdiff_t>(r.end)};
}

bool flat(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

}  // namespace

double rmse(std::span<const double> actual, std::span<const double> predicted) {
  require_same_length(actual, predicted);
  double ss = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(actual.size()));
}

double mape(std::span<const double> actual, std::span<const double> predicted) {
  require_same_length(actual, predicted);
  double s = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) throw Error(Errc::ZeroActual, "index " + std::to_string(i));
    s += std::abs((actual[i] - predicted[i]) / actual[i]);
  }
  return s / static_cast<double>(actual.size());
}

double r2(std::span<const double> actual, std::span<const double> predicted) {
  require_same_length(actual, predicted);
  if (actual.size() < 2) throw Error(Errc::LengthMismatch, "r2 needs at least 2 points");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    sse += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  if (sst == 0.0) throw Error(Errc::ZeroVarianceActual, "actual series is constant");
  return 1.0 - sse / sst;
}

Metrics evaluate(std::span<const double> actual, std::span<const double> predicted) {
  return {rmse(actual, predicted), mape(actual, predicted), r2(actual, predicted)};
}

OhlcvFrame denoise_frame(const OhlcvFrame& frame, const PipelineConfig& cfg) {
  OhlcvFrame out = frame;
  if (!cfg.use_ssa) return out;
  const std::size_t window = cfg.ssa_window ? cfg.ssa_window : ssa::default_window(frame.size());
  for (Channel c : kAllChannels) {
    // The price level would otherwise own nearly all of the energy.
    const auto& x = frame[c];
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> centered(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean;
    out[c] = ssa::denoise(centered, window, cfg.ssa_energy, cfg.exec);
    for (double& v : out[c]) v += mean;
  }
  return out;
}

Decomposition decompose_frame(const OhlcvFrame& denoised, const PipelineConfig& cfg) {
  auto [normalized, norm] = zscore_normalize(denoised);
  Decomposition d;
  d.norm = norm;
  for (Channel c : kAllChannels) d.imfs[c] = emd::decompose(normalized[c], cfg.omega);
  return d;
}

maemd::AlignedImfGroups align_decomposition(const Decomposition& d) {
  const auto& close = d.imfs.at(Channel::Close);
  if (close.imfs.empty()) {
    // Nothing to align against: the whole related channels feed the residual.
    maemd::AlignedImfGroups out;
    out.residual.target = close.residual;
    for (std::size_t slot = 0; slot < maemd::kRelatedChannels.size(); ++slot) {
      const Channel ch = maemd::kRelatedChannels[slot];
      out.residual.related[slot] = {ch, {}, {}, d.imfs.at(ch).reconstruct()};
    }
    return out;
  }
  std::map<Channel, emd::ImfSet> related;
  for (Channel c : maemd::kRelatedChannels) related[c] = d.imfs.at(c);
  return maemd::align(close, related);
}

std::vector<const maemd::AlignedGroup*> ordered_groups(const maemd::AlignedImfGroups& g) {
  std::vector<const maemd::AlignedGroup*> out;
  for (const auto& grp : g.groups) out.push_back(&grp);
  out.push_back(&g.residual);
  return out;
}

std::string group_name(std::size_t index, std::size_t imf_groups) {
  return index < imf_groups ? "imf_" + std::to_string(index + 1) : "residual";
}

std::uint64_t group_seed(std::uint64_t seed, const std::string& ticker, std::size_t group) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : ticker) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed ^ h ^ (0x9e3779b97f4a7c15ULL * (group + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

GroupModel train_group(const maemd::AlignedGroup& group, std::size_t index, std::size_t imf_groups,
                       const SplitRanges& ranges, const PipelineConfig& cfg,
                       const std::string& ticker) {
  GroupModel out;
  out.name = group_name(index, imf_groups);
  const auto channels = group.channels();
  const auto train_target = slice(group.target, ranges.train);
  if (flat(train_target)) {
    out.warning = out.name + ": flat training target, using persistence";
    return out;
  }
  tcn::TcnConfig tc = cfg.tcn;
  tc.input_channels = kNumChannels;
  tc.seed = group_seed(cfg.tcn.seed, ticker, index);
  try {
    const auto all = tcn::make_windows(channels, tc.window);
    const auto train_ds = all.select_labels(ranges.train.begin, ranges.train.end);
    const auto val_ds = all.select_labels(ranges.val.begin, ranges.val.end);
    auto result = tcn::train(tcn::TcnModel(tc), train_ds, val_ds, cfg.exec);
    out.best_epoch = result.best_epoch;
    out.train_loss = std::move(result.train_loss);
    out.val_loss = std::move(result.val_loss);
    out.model = std::move(result.model);
  } catch (const Error& e) {
    if (classify(e.code()) != ErrorClass::Numerical && e.code() != Errc::EmptyDataset) throw;
    out.warning = out.name + ": " + e.what() + ", using persistence";
  }
  return out;
}

GroupForecast predict_group(const maemd::AlignedGroup& group, const GroupModel& model,
                            const SplitRanges& ranges, std::size_t window, Exec exec) {
  GroupForecast out;
  out.name = model.name;
  out.persistence = !model.model.has_value();
  auto predict_range = [&](IndexRange r) {
    std::vector<double> pred;
    if (out.persistence) {
      for (std::size_t t = r.begin; t < r.end; ++t) pred.push_back(group.target[t - 1]);
      return pred;
    }
    const auto all = tcn::make_windows(group.channels(), window);
    const auto ds = all.select_labels(r.begin, r.end);
    if (ds.size() != r.size())
      throw Error(Errc::TooShort, "range starts before the first full window");
    return model.model->predict(ds.inputs, exec);
  };
  out.val_predicted = predict_range(ranges.val);
  out.test_predicted = predict_range(ranges.test);
  out.test_actual = slice(group.target, ranges.test);
  out.test_rmse = rmse(out.test_actual, out.test_predicted);
  if (!flat(out.test_actual)) out.test_r2 = r2(out.test_actual, out.test_predicted);
  return out;
}

ForecastResult assemble(const OhlcvFrame& raw, const NormalizationParams& norm,
                        const SplitRanges& ranges, std::vector<GroupForecast> groups,
                        std::vector<std::string> warnings) {
  ForecastResult r;
  r.ticker = raw.ticker;
  r.ranges = ranges;
  std::vector<double> val(ranges.val.size(), 0.0), test(ranges.test.size(), 0.0);
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < val.size(); ++i) val[i] += g.val_predicted[i];
    for (std::size_t i = 0; i < test.size(); ++i) test[i] += g.test_predicted[i];
  }
  r.val_predicted = denormalize(val, norm, Channel::Close);
  r.test_predicted = denormalize(test, norm, Channel::Close);
  const auto& close = raw[Channel::Close];
  r.val_actual = slice(close, ranges.val);
  r.test_actual = slice(close, ranges.test);
  r.val_dates.assign(raw.dates.begin() + static_cast<std::ptrdiff_t>(ranges.val.begin),
                     raw.dates.begin() + static_cast<std::ptrdiff_t>(ranges.val.end));
  r.test_dates.assign(raw.dates.begin() + static_cast<std::ptrdiff_t>(ranges.test.begin),
                      raw.dates.begin() + static_cast<std::ptrdiff_t>(ranges.test.end));
  r.metrics = evaluate(r.test_actual, r.test_predicted);
  r.groups = std::move(groups);
  r.warnings = std::move(warnings);
  return r;
}

ForecastResult predict_stock(const OhlcvFrame& frame, const PipelineConfig& cfg) {
  if (frame.size() < kMinFrameLength)
    throw Error(Errc::TooShort, frame.ticker + " has " + std::to_string(frame.size()) +
                                    " rows, need " + std::to_string(kMinFrameLength))
        .with_stage("forecast");
  const auto ranges = staged("split", [&] { return split(frame.size(), cfg.split); });
  const auto denoised = staged("denoise", [&] { return denoise_frame(frame, cfg); });
  const auto dec = staged("decompose", [&] { return decompose_frame(denoised, cfg); });
  const auto aligned = staged("align", [&] { return align_decomposition(dec); });

  const auto groups = ordered_groups(aligned);
  std::vector<GroupForecast> forecasts;
  std::vector<std::string> warnings;
  staged("train", [&] {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      auto model = train_group(*groups[g], g, aligned.groups.size(), ranges, cfg, frame.ticker);
      if (!model.warning.empty()) warnings.push_back(model.warning);
      forecasts.push_back(predict_group(*groups[g], model, ranges, cfg.tcn.window, cfg.exec));
    }
    return 0;
  });
  return staged("predict", [&] {
    return assemble(frame, dec.norm, ranges, std::move(forecasts), std::move(warnings));
  });
}

std::string to_json(const ForecastResult& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["ticker"] = r.ticker;
  j["ranges"] = {{"train", {r.ranges.train.begin, r.ranges.train.end}},
                 {"val", {r.ranges.val.begin, r.ranges.val.end}},
                 {"test", {r.ranges.test.begin, r.ranges.test.end}}};
  j["metrics"] = {{"rmse", r.metrics.rmse}, {"mape", r.metrics.mape}, {"r2", r.metrics.r2}};
  ordered_json groups = ordered_json::array();
  for (const auto& g : r.groups) {
    ordered_json gj{{"name", g.name}, {"persistence", g.persistence}, {"test_rmse", g.test_rmse}};
    gj["test_r2"] = g.test_r2 ? ordered_json(*g.test_r2) : ordered_json(nullptr);
    groups.push_back(std::move(gj));
  }
  j["groups"] = std::move(groups);
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string to_csv(const ForecastResult& r) {
  std::string out = "date,split,actual,predicted\n";
  auto rows = [&](const std::vector<Date>& dates, const char* tag, const std::vector<double>& a,
                  const std::vector<double>& p) {
    for (std::size_t i = 0; i < dates.size(); ++i)
      out += format_date(dates[i]) + "," + tag + "," + io::format_double(a[i]) + "," +
             io::format_double(p[i]) + "\n";
  };
  rows(r.val_dates, "val", r.val_actual, r.val_predicted);
  rows(r.test_dates, "test", r.test_actual, r.test_predicted);
  return out;
}

}  // namespace blhybrid::forecast
