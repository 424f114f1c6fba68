#include "blhybrid/stages.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <json.hpp>
#include <optional>
#include <thread>

#include "blhybrid/backtest.hpp"
#include "blhybrid/blacklitterman.hpp"
#include "blhybrid/error.hpp"
#include "blhybrid/forecast.hpp"
#include "blhybrid/io.hpp"

namespace blhybrid::stages {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kStrategies = {"BL", "MV", "EW", "MW"};

fs::path stage_dir(const config::RunConfig& cfg, const char* stage) {
  return cfg.output_dir / stage;
}

void require(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p)) throw Error(Errc::MissingArtifact, stage + " (" + p.string() + ")");
}

void write_json(const fs::path& p, const ordered_json& j) {
  io::write_file_atomic(p, j.dump(2) + "\n");
}

ordered_json read_json(const fs::path& p, const std::string& stage) {
  require(p, stage);
  try {
    return ordered_json::parse(io::read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::UnparsableRow, p.string() + ": " + e.what());
  }
}

template <class F>
void run_stage(const char* stage, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::UnparsableRow, e.what()).with_stage(stage);
  } catch (const std::exception& e) {
    throw Error(Errc::StageFailed, e.what()).with_stage(stage);
  }
}

// Runs fn(ticker) on a bounded pool. Failures surface in ticker order.
void for_each_ticker(const config::RunConfig& cfg,
                     const std::function<void(const std::string&)>& fn) {
  const auto tickers = config::resolve_tickers(cfg);
  const std::size_t workers = std::clamp<std::size_t>(cfg.workers, 1, tickers.size());
  std::vector<std::exception_ptr> errors(tickers.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tickers.size();) {
      try {
        fn(tickers[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

OhlcvFrame load_raw(const config::RunConfig& cfg, const std::string& ticker) {
  const auto path = cfg.data_dir / (ticker + ".csv");
  if (!fs::exists(path)) throw Error(Errc::UnknownTicker, ticker + " has no file in data_dir");
  auto frame = load_ohlcv(path);
  if (frame.size() < forecast::kMinFrameLength)
    throw Error(Errc::TooShort, ticker + " has " + std::to_string(frame.size()) + " rows, need " +
                                    std::to_string(forecast::kMinFrameLength));
  return frame;
}

fs::path imf_path(const config::RunConfig& cfg, const std::string& ticker, Channel c) {
  return stage_dir(cfg, "decompose") / (ticker + "_" + std::string(channel_name(c)) + ".csv");
}

fs::path norm_path(const config::RunConfig& cfg, const std::string& ticker) {
  return stage_dir(cfg, "decompose") / (ticker + "_norm.json");
}

fs::path train_path(const config::RunConfig& cfg, const std::string& ticker, std::size_t g) {
  return stage_dir(cfg, "train") / (ticker + "_group" + std::to_string(g) + ".json");
}

forecast::Decomposition load_decomposition(const config::RunConfig& cfg,
                                           const std::string& ticker) {
  forecast::Decomposition d;
  const auto nj = read_json(norm_path(cfg, ticker), "decompose");
  for (Channel c : kAllChannels) {
    const auto name = std::string(channel_name(c));
    const auto i = static_cast<std::size_t>(c);
    d.norm.mean[i] = nj.at("mean").at(name).get<double>();
    d.norm.stddev[i] = nj.at("stddev").at(name).get<double>();
    const auto p = imf_path(cfg, ticker, c);
    require(p, "decompose");
    auto table = io::read_numeric_csv(p);
    if (table.columns.empty() || table.header.back() != "residual")
      throw Error(Errc::MissingColumn, p.string() + " lacks a residual column");
    emd::ImfSet set;
    set.residual = std::move(table.columns.back());
    table.columns.pop_back();
    set.imfs = std::move(table.columns);
    d.imfs[c] = std::move(set);
  }
  return d;
}

// Rebuilds the aligned groups from the decomposition and the align manifest,
// summing IMFs in the same order as maemd::align.
maemd::AlignedImfGroups load_groups(const config::RunConfig& cfg, const std::string& ticker,
                                    const forecast::Decomposition& d) {
  const auto manifest = read_json(stage_dir(cfg, "align") / (ticker + ".json"), "align");
  const auto& target = d.imfs.at(Channel::Close);
  const std::size_t n = target.residual.size();
  const auto& groups = manifest.at("groups");
  if (groups.size() != target.imfs.size())
    throw Error(Errc::MisalignedRuns, "align manifest does not match the decomposition");
  maemd::AlignedImfGroups out;
  out.groups.resize(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& grp = out.groups[g];
    grp.target_index = g;
    grp.target = target.imfs[g];
    for (std::size_t s = 0; s < maemd::kRelatedChannels.size(); ++s) {
      const Channel ch = maemd::kRelatedChannels[s];
      const auto& src = d.imfs.at(ch);
      const auto& entry = groups[g].at("related").at(std::string(channel_name(ch)));
      auto& slot = grp.related[s];
      slot.channel = ch;
      slot.series.assign(n, 0.0);
      for (const auto& idx : entry.at("imfs")) {
        const auto j = idx.get<std::size_t>();
        if (j >= src.imfs.size()) throw Error(Errc::IndexOutOfRank, "align manifest IMF index");
        slot.imf_indices.push_back(j);
        for (std::size_t t = 0; t < n; ++t) slot.series[t] += src.imfs[j][t];
      }
      for (const auto& k : entry.at("kld"))
        slot.kld.push_back(k.is_null() ? std::nullopt : std::optional<double>(k.get<double>()));
    }
  }
  out.residual.target_index = groups.size();
  out.residual.target = target.residual;
  for (std::size_t s = 0; s < maemd::kRelatedChannels.size(); ++s) {
    const Channel ch = maemd::kRelatedChannels[s];
    const auto& set = d.imfs.at(ch);
    out.residual.related[s] = {ch, {}, {}, groups.empty() ? set.reconstruct() : set.residual};
  }
  return out;
}

ordered_json manifest_json(const std::string& ticker, const maemd::AlignedImfGroups& a) {
  ordered_json groups = ordered_json::array();
  for (const auto& g : a.groups) {
    ordered_json related = ordered_json::object();
    for (const auto& slot : g.related) {
      ordered_json kl = ordered_json::array();
      for (const auto& k : slot.kld) kl.push_back(k ? ordered_json(*k) : ordered_json(nullptr));
      related[std::string(channel_name(slot.channel))] = {{"imfs", slot.imf_indices},
                                                          {"kld", std::move(kl)}};
    }
    groups.push_back({{"target_index", g.target_index}, {"related", std::move(related)}});
  }
  return {{"ticker", ticker},
          {"groups", std::move(groups)},
          {"residual", {{"target_index", a.residual.target_index}}}};
}

struct ForecastSeries {
  std::vector<Date> dates;
  std::vector<double> predicted;
};

ForecastSeries load_test_forecast(const config::RunConfig& cfg, const std::string& ticker) {
  const auto p = stage_dir(cfg, "forecast") / (ticker + ".csv");
  require(p, "forecast");
  ForecastSeries out;
  const auto text = io::read_file(p);
  const auto lines = io::split_lines(text);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto f = io::split_fields(lines[i]);
    if (f.size() != 4) throw Error(Errc::UnparsableRow, p.string() + " line " + std::to_string(i + 1));
    if (f[1] != "test") continue;
    const auto v = io::parse_double(f[3]);
    if (!v) throw Error(Errc::UnparsableRow, p.string() + " line " + std::to_string(i + 1));
    out.dates.push_back(parse_date(f[0]));
    out.predicted.push_back(*v);
  }
  return out;
}

ordered_json report_row(const backtest::BacktestReport& r, bool rebalancing) {
  ordered_json j{{"strategy", r.strategy},
                 {rebalancing ? "period" : "holding_period", r.holding_period},
                 {"runs", r.returns.size()},
                 {"annual_return", r.annual_return},
                 {"annual_volatility", r.annual_volatility},
                 {"sharpe", r.sharpe},
                 {"zero_volatility", r.zero_volatility},
                 {"cumulative_return", r.cumulative_return},
                 {"mean_hhi", r.mean_hhi},
                 {"std_hhi", r.std_hhi},
                 {"mean_stock_count", r.mean_stock_count},
                 {"std_stock_count", r.std_stock_count}};
  if (rebalancing) {
    j["cost_paid"] = r.cost_paid;
    j["final_wealth"] = r.final_wealth;
  }
  return j;
}

}  // namespace

void cmd_denoise(const config::RunConfig& cfg) {
  run_stage("denoise", [&] {
    config::validate(cfg);
    fs::create_directories(stage_dir(cfg, "denoise"));
    for_each_ticker(cfg, [&](const std::string& t) {
      const auto denoised = forecast::denoise_frame(load_raw(cfg, t), cfg.pipeline);
      io::write_file_atomic(stage_dir(cfg, "denoise") / (t + ".csv"), format_ohlcv(denoised));
    });
  });
}

void cmd_decompose(const config::RunConfig& cfg) {
  run_stage("decompose", [&] {
    config::validate(cfg);
    fs::create_directories(stage_dir(cfg, "decompose"));
    for_each_ticker(cfg, [&](const std::string& t) {
      const auto src = stage_dir(cfg, "denoise") / (t + ".csv");
      require(src, "denoise");
      auto frame = load_ohlcv(src);
      frame.ticker = t;
      const auto d = forecast::decompose_frame(frame, cfg.pipeline);
      ordered_json norm{{"mean", ordered_json::object()}, {"stddev", ordered_json::object()}};
      for (Channel c : kAllChannels) {
        const auto name = std::string(channel_name(c));
        const auto& set = d.imfs.at(c);
        std::vector<std::string> header;
        std::vector<std::vector<double>> columns = set.imfs;
        for (std::size_t i = 0; i < set.imfs.size(); ++i) header.push_back("imf_" + std::to_string(i + 1));
        header.push_back("residual");
        columns.push_back(set.residual);
        io::write_file_atomic(imf_path(cfg, t, c), io::format_numeric_csv(header, columns));
        norm["mean"][name] = d.norm.mean[static_cast<std::size_t>(c)];
        norm["stddev"][name] = d.norm.stddev[static_cast<std::size_t>(c)];
      }
      write_json(norm_path(cfg, t), norm);
    });
  });
}

void cmd_align(const config::RunConfig& cfg) {
  run_stage("align", [&] {
    config::validate(cfg);
    fs::create_directories(stage_dir(cfg, "align"));
    for_each_ticker(cfg, [&](const std::string& t) {
      const auto d = load_decomposition(cfg, t);
      write_json(stage_dir(cfg, "align") / (t + ".json"),
                 manifest_json(t, forecast::align_decomposition(d)));
    });
  });
}

void cmd_train(const config::RunConfig& cfg) {
  run_stage("train", [&] {
    config::validate(cfg);
    fs::create_directories(stage_dir(cfg, "train"));
    for_each_ticker(cfg, [&](const std::string& t) {
      const auto d = load_decomposition(cfg, t);
      const auto aligned = load_groups(cfg, t, d);
      const auto ranges = split(d.imfs.at(Channel::Close).residual.size(), cfg.pipeline.split);
      const auto groups = forecast::ordered_groups(aligned);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto m =
            forecast::train_group(*groups[g], g, aligned.groups.size(), ranges, cfg.pipeline, t);
        ordered_json j{{"ticker", t},          {"group", g},
                       {"name", m.name},       {"best_epoch", m.best_epoch},
                       {"warning", m.warning}, {"train_loss", m.train_loss},
                       {"val_loss", m.val_loss}};
        j["model"] = m.model ? ordered_json::parse(tcn::to_checkpoint(*m.model))
                             : ordered_json(nullptr);
        write_json(train_path(cfg, t, g), j);
      }
    });
  });
}

void cmd_predict(const config::RunConfig& cfg) {
  run_stage("predict", [&] {
    config::validate(cfg);
    fs::create_directories(stage_dir(cfg, "forecast"));
    for_each_ticker(cfg, [&](const std::string& t) {
      const auto raw = load_raw(cfg, t);
      const auto d = load_decomposition(cfg, t);
      const auto aligned = load_groups(cfg, t, d);
      const auto ranges = split(raw.size(), cfg.pipeline.split);
      const auto groups = forecast::ordered_groups(aligned);
      std::vector<forecast::GroupForecast> preds;
      std::vector<std::string> warnings;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto j = read_json(train_path(cfg, t, g), "train");
        forecast::GroupModel m;
        m.name = j.at("name").get<std::string>();
        m.warning = j.at("warning").get<std::string>();
        if (!j.at("model").is_null()) m.model = tcn::from_checkpoint(j.at("model").dump());
        if (!m.warning.empty()) warnings.push_back(m.warning);
        preds.push_back(forecast::predict_group(*groups[g], m, ranges, cfg.pipeline.tcn.window,
                                                cfg.pipeline.exec));
      }
      const auto result = forecast::assemble(raw, d.norm, ranges, std::move(preds), warnings);
      io::write_file_atomic(stage_dir(cfg, "forecast") / (t + ".json"), forecast::to_json(result));
      io::write_file_atomic(stage_dir(cfg, "forecast") / (t + ".csv"), forecast::to_csv(result));
    });
  });
}

void cmd_backtest(const config::RunConfig& cfg) {
  run_stage("backtest", [&] {
    config::validate(cfg);
    const auto tickers = config::resolve_tickers(cfg);
    const auto n_assets = tickers.size();

    std::vector<ForecastSeries> forecasts;
    for (const auto& t : tickers) forecasts.push_back(load_test_forecast(cfg, t));
    std::vector<OhlcvFrame> frames;
    for (const auto& t : tickers) frames.push_back(load_raw(cfg, t));
    for (const auto& f : frames)
      if (f.dates != frames.front().dates)
        throw Error(Errc::MisalignedRuns, f.ticker + " dates differ from " + frames.front().ticker);
    const auto caps_path =
        cfg.market_caps.is_absolute() ? cfg.market_caps : cfg.data_dir / cfg.market_caps;
    const auto caps = load_market_caps(caps_path);

    const std::size_t n = frames.front().size();
    const auto ranges = split(n, cfg.pipeline.split);
    for (std::size_t a = 0; a < n_assets; ++a) {
      const auto& fc = forecasts[a];
      if (fc.predicted.size() != ranges.test.size() ||
          !std::equal(fc.dates.begin(), fc.dates.end(),
                      frames[a].dates.begin() + static_cast<std::ptrdiff_t>(ranges.test.begin)))
        throw Error(Errc::MisalignedRuns, tickers[a] + " forecast does not cover the test range");
    }

    // Panel row d is frame index test.begin - 1 + d.
    const std::size_t first = ranges.test.begin - 1;
    backtest::PricePanel panel;
    panel.tickers = tickers;
    panel.prices.resize(static_cast<Eigen::Index>(ranges.test.size() + 1),
                        static_cast<Eigen::Index>(n_assets));
    for (std::size_t d = 0; d <= ranges.test.size(); ++d) {
      panel.dates.push_back(frames.front().dates[first + d]);
      for (std::size_t a = 0; a < n_assets; ++a)
        panel.prices(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(a)) =
            frames[a][Channel::Close][first + d];
    }
    Eigen::MatrixXd returns(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n_assets));
    for (std::size_t a = 0; a < n_assets; ++a) {
      const auto r = to_returns(frames[a][Channel::Close]);
      for (std::size_t t = 0; t < r.size(); ++t)
        returns(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a)) = r[t];
    }
    // History available at frame index t: returns ending at t, at most lookback of them.
    auto history = [&](std::size_t t) -> Eigen::MatrixXd {
      const std::size_t rows = std::min(cfg.bl.lookback_days, t);
      return returns.middleRows(static_cast<Eigen::Index>(t - rows),
                                static_cast<Eigen::Index>(rows));
    };
    auto market_weights = [&](std::size_t t) {
      std::map<std::string, double> m;
      for (const auto& tk : tickers) m[tk] = market_cap_at(caps, tk, frames.front().dates[t]);
      return backtest::strategy_market_weight(tickers, m).weights;
    };
    const double rf = cfg.bl.rf_daily;

    std::map<std::string, std::function<Eigen::VectorXd(std::size_t)>> raw_sources;
    raw_sources["EW"] = [&](std::size_t) { return backtest::strategy_equal_weight(tickers).weights; };
    raw_sources["MW"] = [&](std::size_t d) { return market_weights(first + d); };
    raw_sources["MV"] = [&](std::size_t d) {
      const Eigen::MatrixXd h = history(first + d).array() - rf;
      return backtest::strategy_mean_variance(tickers, h, cfg.bl.lambda).weights;
    };
    raw_sources["BL"] = [&](std::size_t d) {
      const std::size_t t = first + d;
      const Eigen::MatrixXd h = history(t).array() - rf;
      bl::MarketInputs in;
      in.tickers = tickers;
      in.covariance = bl::sample_covariance(h).covariance;
      in.market_weights = market_weights(t);
      in.risk_aversion = cfg.bl.lambda;
      in.tau = cfg.bl.tau;
      in.rf_daily = rf;
      const auto prior = bl::implied_returns(in);
      std::vector<bl::View> views;
      for (std::size_t a = 0; a < n_assets; ++a)
        views.push_back({tickers[a], forecasts[a].predicted[d] / frames[a][Channel::Close][t] -
                                         1.0 - rf});
      const auto vs = bl::build_views(views, tickers, in.covariance, in.tau);
      return bl::optimal_weights(bl::posterior(prior, in.covariance, vs, in.tau), in.risk_aversion);
    };
    // Weights depend only on the day, so each is computed once.
    std::map<std::string, backtest::WeightSource> sources;
    auto cache = std::make_shared<std::map<std::string, std::vector<std::optional<Eigen::VectorXd>>>>();
    for (const auto& s : kStrategies) {
      (*cache)[s].resize(ranges.test.size());
      sources[s] = [&, s, cache](std::size_t d) {
        auto& slot = (*cache)[s].at(d);
        if (!slot) slot = raw_sources.at(s)(d);
        return *slot;
      };
    }

    ordered_json rolling = ordered_json::array(), rebal = ordered_json::array(),
                 tallies = ordered_json::array();
    std::string tally_csv = "holding_period,strategy,runs,highest,lowest\n";
    for (std::size_t h : cfg.backtest.holding_periods) {
      std::map<std::string, backtest::BacktestReport> reports;
      for (const auto& s : kStrategies)
        reports[s] = backtest::rolling_scheme(panel, sources[s], h, rf, s);
      const auto tally = backtest::tally_extremes(reports);
      for (const auto& s : kStrategies) {
        rolling.push_back(report_row(reports[s], false));
        tally_csv += std::to_string(h) + "," + s + "," + std::to_string(tally.runs) + "," +
                     std::to_string(tally.highest.at(s)) + "," + std::to_string(tally.lowest.at(s)) +
                     "\n";
      }
      ordered_json hi = ordered_json::object(), lo = ordered_json::object();
      for (const auto& s : kStrategies) {
        hi[s] = tally.highest.at(s);
        lo[s] = tally.lowest.at(s);
      }
      tallies.push_back({{"holding_period", h}, {"runs", tally.runs}, {"highest", hi}, {"lowest", lo}});
      for (const auto& s : kStrategies)
        rebal.push_back(report_row(
            backtest::rebalance_run(panel, sources[s], h, cfg.backtest.cost_rate, rf, s), true));
    }

    ordered_json fc = ordered_json::array();
    for (const auto& t : tickers) {
      const auto j = read_json(stage_dir(cfg, "forecast") / (t + ".json"), "forecast");
      fc.push_back({{"ticker", t}, {"metrics", j.at("metrics")}});
    }

    ordered_json report;
    report["conventions"] = {
        {"periods_per_year", backtest::kTradingDays},
        {"annual_return", "(1 + mean holding-period return)^(252 / h) - 1"},
        {"annual_volatility", "std of holding-period returns * sqrt(252 / h)"},
        {"sharpe", "mean excess return / std * sqrt(252 / h); 0 when volatility is zero"},
        {"ties", "a tied run counts as highest or lowest for every tying strategy"},
        {"rf_daily", rf},
        {"cost_rate", cfg.backtest.cost_rate}};
    report["tickers"] = tickers;
    report["test_window"] = {{"first_date", format_date(panel.dates.front())},
                             {"last_date", format_date(panel.dates.back())},
                             {"return_days", panel.return_days()}};
    report["forecast"] = std::move(fc);
    report["rolling"] = std::move(rolling);
    report["rebalancing"] = std::move(rebal);
    report["tally"] = std::move(tallies);
    fs::create_directories(cfg.output_dir);
    write_json(cfg.output_dir / "report.json", report);
    io::write_file_atomic(cfg.output_dir / "tally.csv", tally_csv);

    for (const auto& s : kStrategies) {
      std::string csv = "date";
      for (const auto& t : tickers) csv += "," + t;
      csv += "\n";
      for (std::size_t d = 0; d < ranges.test.size(); ++d) {
        const auto w = sources[s](d);
        csv += format_date(panel.dates[d]);
        for (Eigen::Index i = 0; i < w.size(); ++i) csv += "," + io::format_double(w(i));
        csv += "\n";
      }
      io::write_file_atomic(cfg.output_dir / ("weights_" + s + ".csv"), csv);
    }
  });
}

void cmd_run_all(const config::RunConfig& cfg) {
  cmd_denoise(cfg);
  cmd_decompose(cfg);
  cmd_align(cfg);
  cmd_train(cfg);
  cmd_predict(cfg);
  cmd_backtest(cfg);
}

void cmd_synth(const synth::SynthSpec& spec, const fs::path& dir) {
  run_stage("synth", [&] { synth::write_dataset(dir, synth::generate(spec)); });
}

int exit_code(const std::exception& e) noexcept {
  if (auto err = dynamic_cast<const Error*>(&e)) {
    switch (classify(err->code())) {
      case ErrorClass::Config: return 2;
      case ErrorClass::Data: return 3;
      case ErrorClass::Numerical: return 4;
    }
  }
  return 4;
}

}  // namespace blhybrid::stages
