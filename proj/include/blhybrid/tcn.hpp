#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "blhybrid/exec.hpp"

namespace blhybrid::tcn {

struct TcnConfig {
  std::size_t kernel_size = 2;
  std::vector<std::size_t> hidden_sizes{64, 128};
  double dropout = 0.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t window = 7;
  std::size_t input_channels = 5;
  /// Adds the window's last channel-0 value to the head output, so the
  /// network learns the step change rather than the level.
  bool last_value_skip = true;

  std::size_t num_levels() const noexcept { return hidden_sizes.size(); }
  /// Throws Error(InvalidArgument) on a violated invariant.
  void validate() const;
};

/// Time-major sequence: `steps` rows of `channels` values.
struct Sequence {
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  Sequence() = default;
  Sequence(std::size_t t, std::size_t c) : steps(t), channels(c), data(t * c, 0.0) {}
  double& at(std::size_t t, std::size_t c) { return data[t * channels + c]; }
  double at(std::size_t t, std::size_t c) const { return data[t * channels + c]; }
};

/// Dilated causal convolution. `weights` is laid out [out][in][tap]; tap i
/// reads the input `i * dilation` steps in the past, zero before the start.
Sequence causal_conv(const Sequence& input, std::span<const double> weights,
                     std::span<const double> bias, std::size_t out_channels,
                     std::size_t kernel_size, std::size_t dilation);

/// Parameter offsets for one residual block.
struct LevelLayout {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t dilation = 1;
  std::size_t conv1_w = 0, conv1_b = 0;
  std::size_t conv2_w = 0, conv2_b = 0;
  bool has_downsample = false;
  std::size_t down_w = 0, down_b = 0;
};

/// Inverted-dropout multipliers for one sample: two per level, steps x out.
using DropoutMasks = std::vector<std::vector<double>>;

class TcnModel {
 public:
  /// Seeded uniform(+-1/sqrt(fan_in)) initialization.
  explicit TcnModel(TcnConfig config);
  TcnModel(TcnConfig config, std::vector<double> parameters);

  const TcnConfig& config() const noexcept { return config_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  const std::vector<LevelLayout>& levels() const noexcept { return levels_; }
  std::size_t head_weights() const noexcept { return head_w_; }
  std::size_t head_bias() const noexcept { return head_b_; }

  /// 1 + sum over levels of 2 * (k - 1) * 2^level.
  std::size_t receptive_field() const noexcept;

  /// Output of one residual block. `masks` may be null (no dropout).
  Sequence residual_block(const Sequence& input, std::size_t level,
                          const std::vector<double>* mask1 = nullptr,
                          const std::vector<double>* mask2 = nullptr) const;

  /// Eval-mode prediction for one window (window x input_channels, time-major).
  double forward(std::span<const double> window) const;

  /// Predictions for consecutive windows stored back to back.
  std::vector<double> predict(std::span<const double> windows, Exec exec = Exec::Parallel) const;

 private:
  void build_layout();

  TcnConfig config_;
  std::vector<LevelLayout> levels_;
  std::size_t head_w_ = 0, head_b_ = 0;
  std::vector<double> params_;
};

struct WindowDataset {
  std::size_t window = 0;
  std::size_t channels = 0;
  std::vector<double> inputs;   // samples x window x channels
  std::vector<double> targets;  // one per sample
  std::vector<std::size_t> label_index;  // series index of each target

  std::size_t size() const noexcept { return targets.size(); }
  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * window * channels, window * channels};
  }
  /// Samples whose label index falls in [begin, end).
  WindowDataset select_labels(std::size_t begin, std::size_t end) const;
};

/// Sample i reads steps i .. i + w - 1 of every channel; its target is
/// channel 0 at step i + w.
WindowDataset make_windows(std::span<const std::vector<double>> channels, std::size_t window);

struct BatchGradient {
  double loss = 0.0;             // mean squared error over the batch
  std::vector<double> gradient;  // d loss / d parameters
};

/// MSE loss and exact gradient over the listed samples. `masks` is either
/// empty or holds one entry per listed sample.
BatchGradient compute_gradients(const TcnModel& model, const WindowDataset& data,
                                std::span<const std::size_t> samples,
                                std::span<const DropoutMasks> masks = {},
                                Exec exec = Exec::Parallel);

/// Mean squared error in eval mode.
double evaluate_loss(const TcnModel& model, const WindowDataset& data,
                     Exec exec = Exec::Parallel);

struct TrainResult {
  TcnModel model;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch, empty without validation data
  std::size_t best_epoch = 0;
};

/// Adam on shuffled mini-batches; returns the snapshot with the best
/// validation loss (training loss when `val` is empty). DivergedLoss when a
/// loss is non-finite or an epoch ends above 1e6 * max(1, initial loss).
TrainResult train(TcnModel model, const WindowDataset& data, const WindowDataset& val,
                  Exec exec = Exec::Parallel);

/// Versioned JSON checkpoint holding the config and flat parameters.
std::string to_checkpoint(const TcnModel& model);
TcnModel from_checkpoint(std::string_view text);

}  // namespace blhybrid::tcn
