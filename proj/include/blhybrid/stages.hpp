#pragma once

#include <exception>
#include <filesystem>
#include <string>

#include "blhybrid/config.hpp"
#include "blhybrid/synth.hpp"

namespace blhybrid::stages {

/// Each command reads the previous stage's artifacts from cfg.output_dir and
/// writes its own atomically. Errors are tagged with the stage name; a
/// missing input raises MissingArtifact naming the stage that should have
/// produced it.
void cmd_denoise(const config::RunConfig& cfg);
void cmd_decompose(const config::RunConfig& cfg);
void cmd_align(const config::RunConfig& cfg);
void cmd_train(const config::RunConfig& cfg);
void cmd_predict(const config::RunConfig& cfg);
void cmd_backtest(const config::RunConfig& cfg);
void cmd_run_all(const config::RunConfig& cfg);

void cmd_synth(const synth::SynthSpec& spec, const std::filesystem::path& dir);

/// 0 success, 2 config, 3 data, 4 numerical failure.
int exit_code(const std::exception& e) noexcept;

}  // namespace blhybrid::stages
