#include <CLI11.hpp>
#include <iostream>

#include "blhybrid/error.hpp"
#include "blhybrid/stages.hpp"

using namespace blhybrid;

int main(int argc, char** argv) {
  CLI::App app{"SSA / mode-aligned EMD / TCN forecasts feeding Black-Litterman portfolios"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::size_t> ssa_window;
  std::optional<double> ssa_energy;
  std::optional<std::size_t> workers;

  struct Staged {
    const char* name;
    const char* help;
    void (*run)(const config::RunConfig&);
  };
  const Staged staged[] = {
      {"denoise", "SSA-denoise every OHLCV channel", stages::cmd_denoise},
      {"decompose", "z-score and decompose each channel into IMFs", stages::cmd_decompose},
      {"align", "assign related-channel IMFs to Close IMFs", stages::cmd_align},
      {"train", "train one network per aligned group", stages::cmd_train},
      {"predict", "forecast validation and test closes", stages::cmd_predict},
      {"backtest", "run the portfolio backtests and write reports", stages::cmd_backtest},
      {"run_all", "every stage in order", stages::cmd_run_all},
  };
  std::vector<std::pair<CLI::App*, const Staged*>> subs;
  for (const auto& s : staged) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("-c,--config", config_path, "config file")->required();
    sub->add_option("--ssa-window", ssa_window, "SSA embedding window (0 picks a default)");
    sub->add_option("--ssa-energy", ssa_energy, "fraction of SSA energy kept");
    sub->add_option("--workers", workers, "assets processed concurrently");
    subs.emplace_back(sub, &s);
  }

  synth::SynthSpec spec;
  std::string synth_out = "data";
  bool no_noise = false;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic OHLCV dataset");
  synth_cmd->add_option("-o,--out", synth_out, "output directory");
  synth_cmd->add_option("--assets", spec.assets, "number of assets");
  synth_cmd->add_option("--days", spec.days, "number of trading days");
  synth_cmd->add_option("--seed", spec.seed, "generator seed");
  synth_cmd->add_option("--snr-db", spec.snr_db, "sinusoid-to-noise power ratio in dB");
  synth_cmd->add_flag("--no-noise", no_noise, "omit the noise term");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) {
      spec.noise = !no_noise;
      stages::cmd_synth(spec, synth_out);
      return 0;
    }
    for (const auto& [sub, s] : subs) {
      if (!sub->parsed()) continue;
      auto cfg = config::load_config(config_path);
      if (ssa_window) cfg.pipeline.ssa_window = *ssa_window;
      if (ssa_energy) cfg.pipeline.ssa_energy = *ssa_energy;
      if (workers) cfg.workers = *workers;
      s->run(cfg);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return stages::exit_code(e);
  }
}
