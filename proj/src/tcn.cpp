#include "blhybrid/tcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "blhybrid/error.hpp"

namespace blhybrid::tcn {

void TcnConfig::validate() const {
  if (kernel_size < 2) throw Error(Errc::InvalidArgument, "kernel_size must be >= 2");
  if (hidden_sizes.empty()) throw Error(Errc::InvalidArgument, "need at least one level");
  for (auto h : hidden_sizes)
    if (h == 0) throw Error(Errc::InvalidArgument, "hidden size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::InvalidArgument, "dropout in [0,1)");
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning_rate must be > 0");
  if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be positive");
  if (window == 0 || input_channels == 0)
    throw Error(Errc::InvalidArgument, "window and input_channels must be positive");
}

namespace {

// y[s][o] = b[o] + sum_i sum_c w[o][c][i] * x[s - d*i][c]
void conv_forward(const Sequence& x, const double* w, const double* b, std::size_t out,
                  std::size_t k, std::size_t d, Sequence& y) {
  const std::size_t in = x.channels;
  y = Sequence(x.steps, out);
  for (std::size_t s = 0; s < x.steps; ++s) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* wo = w + o * in * k;
      for (std::size_t i = 0; i < k && d * i <= s; ++i) {
        const double* xs = &x.data[(s - d * i) * in];
        for (std::size_t c = 0; c < in; ++c) acc += wo[c * k + i] * xs[c];
      }
      y.at(s, o) = acc;
    }
  }
}

void conv_backward(const Sequence& x, const double* w, const Sequence& dy, std::size_t k,
                   std::size_t d, double* dw, double* db, Sequence& dx) {
  const std::size_t in = x.channels;
  for (std::size_t s = 0; s < dy.steps; ++s) {
    for (std::size_t o = 0; o < dy.channels; ++o) {
      const double g = dy.at(s, o);
      if (g == 0.0) continue;
      db[o] += g;
      const double* wo = w + o * in * k;
      double* dwo = dw + o * in * k;
      for (std::size_t i = 0; i < k && d * i <= s; ++i) {
        const std::size_t t = s - d * i;
        const double* xs = &x.data[t * in];
        double* dxs = &dx.data[t * in];
        for (std::size_t c = 0; c < in; ++c) {
          dwo[c * k + i] += g * xs[c];
          dxs[c] += g * wo[c * k + i];
        }
      }
    }
  }
}

// 1x1 convolution: y[s][o] = b[o] + sum_c w[o][c] * x[s][c]
void pointwise_forward(const Sequence& x, const double* w, const double* b, std::size_t out,
                       Sequence& y) {
  conv_forward(x, w, b, out, 1, 1, y);
}

void relu_dropout(const Sequence& a, const std::vector<double>* mask, Sequence& h) {
  h = a;
  for (std::size_t j = 0; j < h.data.size(); ++j) {
    double v = h.data[j] > 0.0 ? h.data[j] : 0.0;
    if (mask) v *= (*mask)[j];
    h.data[j] = v;
  }
}

struct LevelCache {
  Sequence input, a1, h1, a2, h2, res, z;
};

struct ForwardCache {
  std::vector<LevelCache> levels;
  Sequence output;  // relu(z) of the last level
  double prediction = 0.0;
};

}  // namespace

Sequence causal_conv(const Sequence& input, std::span<const double> weights,
                     std::span<const double> bias, std::size_t out_channels,
                     std::size_t kernel_size, std::size_t dilation) {
  if (dilation == 0) throw Error(Errc::InvalidArgument, "dilation must be >= 1");
  if (weights.size() != out_channels * input.channels * kernel_size ||
      bias.size() != out_channels)
    throw Error(Errc::ShapeMismatch, "convolution parameter shape");
  Sequence out;
  conv_forward(input, weights.data(), bias.data(), out_channels, kernel_size, dilation, out);
  return out;
}

TcnModel::TcnModel(TcnConfig config) : config_(std::move(config)) {
  config_.validate();
  build_layout();
  std::mt19937_64 gen(config_.seed);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t j = 0; j < count; ++j) params_[offset + j] = dist(gen);
  };
  const std::size_t k = config_.kernel_size;
  for (const auto& lv : levels_) {
    fill(lv.conv1_w, lv.out_channels * lv.in_channels * k, lv.in_channels * k);
    fill(lv.conv1_b, lv.out_channels, lv.in_channels * k);
    fill(lv.conv2_w, lv.out_channels * lv.out_channels * k, lv.out_channels * k);
    fill(lv.conv2_b, lv.out_channels, lv.out_channels * k);
    if (lv.has_downsample) {
      fill(lv.down_w, lv.out_channels * lv.in_channels, lv.in_channels);
      fill(lv.down_b, lv.out_channels, lv.in_channels);
    }
  }
  const std::size_t last = config_.hidden_sizes.back();
  fill(head_w_, last, last);
  fill(head_b_, 1, last);
}

TcnModel::TcnModel(TcnConfig config, std::vector<double> parameters)
    : config_(std::move(config)) {
  config_.validate();
  build_layout();
  if (parameters.size() != params_.size())
    throw Error(Errc::ShapeMismatch, "expected " + std::to_string(params_.size()) +
                                         " parameters, got " + std::to_string(parameters.size()));
  params_ = std::move(parameters);
}

void TcnModel::build_layout() {
  levels_.clear();
  std::size_t offset = 0;
  std::size_t in = config_.input_channels;
  const std::size_t k = config_.kernel_size;
  for (std::size_t l = 0; l < config_.num_levels(); ++l) {
    LevelLayout lv;
    lv.in_channels = in;
    lv.out_channels = config_.hidden_sizes[l];
    lv.dilation = std::size_t{1} << l;
    lv.conv1_w = offset;
    offset += lv.out_channels * in * k;
    lv.conv1_b = offset;
    offset += lv.out_channels;
    lv.conv2_w = offset;
    offset += lv.out_channels * lv.out_channels * k;
    lv.conv2_b = offset;
    offset += lv.out_channels;
    lv.has_downsample = in != lv.out_channels;
    if (lv.has_downsample) {
      lv.down_w = offset;
      offset += lv.out_channels * in;
      lv.down_b = offset;
      offset += lv.out_channels;
    }
    levels_.push_back(lv);
    in = lv.out_channels;
  }
  head_w_ = offset;
  offset += in;
  head_b_ = offset;
  offset += 1;
  params_.assign(offset, 0.0);
}

std::size_t TcnModel::receptive_field() const noexcept {
  std::size_t rf = 1;
  for (const auto& lv : levels_) rf += 2 * (config_.kernel_size - 1) * lv.dilation;
  return rf;
}

namespace {

void level_forward(const TcnModel& model, std::size_t level, const Sequence& x,
                   const std::vector<double>* mask1, const std::vector<double>* mask2,
                   LevelCache& c) {
  const auto& lv = model.levels()[level];
  const double* p = model.parameters().data();
  const std::size_t k = model.config().kernel_size;
  c.input = x;
  conv_forward(x, p + lv.conv1_w, p + lv.conv1_b, lv.out_channels, k, lv.dilation, c.a1);
  relu_dropout(c.a1, mask1, c.h1);
  conv_forward(c.h1, p + lv.conv2_w, p + lv.conv2_b, lv.out_channels, k, lv.dilation, c.a2);
  relu_dropout(c.a2, mask2, c.h2);
  if (lv.has_downsample)
    pointwise_forward(x, p + lv.down_w, p + lv.down_b, lv.out_channels, c.res);
  else
    c.res = x;
  c.z = c.res;
  for (std::size_t j = 0; j < c.z.data.size(); ++j) c.z.data[j] += c.h2.data[j];
}

Sequence relu_of(const Sequence& z) {
  Sequence o = z;
  for (auto& v : o.data) v = v > 0.0 ? v : 0.0;
  return o;
}

void forward_cached(const TcnModel& model, std::span<const double> window,
                    const DropoutMasks* masks, ForwardCache& cache) {
  const auto& cfg = model.config();
  if (window.size() != cfg.window * cfg.input_channels)
    throw Error(Errc::ShapeMismatch, "window has " + std::to_string(window.size()) +
                                         " values, expected " +
                                         std::to_string(cfg.window * cfg.input_channels));
  Sequence x(cfg.window, cfg.input_channels);
  std::copy(window.begin(), window.end(), x.data.begin());
  cache.levels.resize(model.levels().size());
  for (std::size_t l = 0; l < model.levels().size(); ++l) {
    const std::vector<double>* m1 = masks ? &(*masks)[2 * l] : nullptr;
    const std::vector<double>* m2 = masks ? &(*masks)[2 * l + 1] : nullptr;
    level_forward(model, l, x, m1, m2, cache.levels[l]);
    x = relu_of(cache.levels[l].z);
  }
  cache.output = std::move(x);
  const double* p = model.parameters().data();
  const std::size_t width = cache.output.channels;
  const std::size_t last = cache.output.steps - 1;
  double y = p[model.head_bias()];
  for (std::size_t c = 0; c < width; ++c) y += p[model.head_weights() + c] * cache.output.at(last, c);
  if (cfg.last_value_skip) y += window[(cfg.window - 1) * cfg.input_channels];
  cache.prediction = y;
}

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(prediction).
void backward(const TcnModel& model, const ForwardCache& cache, const DropoutMasks* masks,
              double dy, double* grad) {
  const double* p = model.parameters().data();
  const std::size_t k = model.config().kernel_size;
  const std::size_t width = cache.output.channels;
  const std::size_t last = cache.output.steps - 1;

  grad[model.head_bias()] += dy;
  Sequence d_out(cache.output.steps, width);
  for (std::size_t c = 0; c < width; ++c) {
    grad[model.head_weights() + c] += dy * cache.output.at(last, c);
    d_out.at(last, c) = dy * p[model.head_weights() + c];
  }

  for (std::size_t l = model.levels().size(); l-- > 0;) {
    const auto& lv = model.levels()[l];
    const auto& c = cache.levels[l];
    Sequence dz = d_out;
    for (std::size_t j = 0; j < dz.data.size(); ++j)
      if (!(c.z.data[j] > 0.0)) dz.data[j] = 0.0;

    Sequence dx(c.input.steps, c.input.channels);
    if (lv.has_downsample) {
      conv_backward(c.input, p + lv.down_w, dz, 1, 1, grad + lv.down_w, grad + lv.down_b, dx);
    } else {
      for (std::size_t j = 0; j < dx.data.size(); ++j) dx.data[j] += dz.data[j];
    }

    Sequence da2 = dz;
    const std::vector<double>* m2 = masks ? &(*masks)[2 * l + 1] : nullptr;
    for (std::size_t j = 0; j < da2.data.size(); ++j) {
      double g = c.a2.data[j] > 0.0 ? da2.data[j] : 0.0;
      if (m2) g *= (*m2)[j];
      da2.data[j] = g;
    }
    Sequence dh1(c.h1.steps, c.h1.channels);
    conv_backward(c.h1, p + lv.conv2_w, da2, k, lv.dilation, grad + lv.conv2_w,
                  grad + lv.conv2_b, dh1);

    const std::vector<double>* m1 = masks ? &(*masks)[2 * l] : nullptr;
    for (std::size_t j = 0; j < dh1.data.size(); ++j) {
      double g = c.a1.data[j] > 0.0 ? dh1.data[j] : 0.0;
      if (m1) g *= (*m1)[j];
      dh1.data[j] = g;
    }
    conv_backward(c.input, p + lv.conv1_w, dh1, k, lv.dilation, grad + lv.conv1_w,
                  grad + lv.conv1_b, dx);
    d_out = std::move(dx);
  }
}

}  // namespace

Sequence TcnModel::residual_block(const Sequence& input, std::size_t level,
                                  const std::vector<double>* mask1,
                                  const std::vector<double>* mask2) const {
  if (level >= levels_.size()) throw Error(Errc::InvalidArgument, "no such level");
  if (input.channels != levels_[level].in_channels)
    throw Error(Errc::ShapeMismatch, "block input channels");
  LevelCache c;
  level_forward(*this, level, input, mask1, mask2, c);
  return relu_of(c.z);
}

double TcnModel::forward(std::span<const double> window) const {
  ForwardCache cache;
  forward_cached(*this, window, nullptr, cache);
  return cache.prediction;
}

std::vector<double> TcnModel::predict(std::span<const double> windows, Exec exec) const {
  const std::size_t stride = config_.window * config_.input_channels;
  if (windows.size() % stride != 0) throw Error(Errc::ShapeMismatch, "window block size");
  const auto n = static_cast<std::ptrdiff_t>(windows.size() / stride);
  std::vector<double> out(static_cast<std::size_t>(n));
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] =
          forward(windows.subspan(static_cast<std::size_t>(i) * stride, stride));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] =
          forward(windows.subspan(static_cast<std::size_t>(i) * stride, stride));
  }
  return out;
}

WindowDataset WindowDataset::select_labels(std::size_t begin, std::size_t end) const {
  WindowDataset out;
  out.window = window;
  out.channels = channels;
  const std::size_t stride = window * channels;
  for (std::size_t i = 0; i < size(); ++i) {
    if (label_index[i] < begin || label_index[i] >= end) continue;
    out.inputs.insert(out.inputs.end(), inputs.begin() + static_cast<std::ptrdiff_t>(i * stride),
                      inputs.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
    out.targets.push_back(targets[i]);
    out.label_index.push_back(label_index[i]);
  }
  return out;
}

WindowDataset make_windows(std::span<const std::vector<double>> channels, std::size_t window) {
  if (channels.empty()) throw Error(Errc::ShapeMismatch, "no channels");
  const std::size_t n = channels.front().size();
  for (const auto& ch : channels)
    if (ch.size() != n) throw Error(Errc::ShapeMismatch, "channel lengths differ");
  if (window == 0 || n <= window)
    throw Error(Errc::TooShort, "series of length " + std::to_string(n) + " with window " +
                                    std::to_string(window));
  WindowDataset ds;
  ds.window = window;
  ds.channels = channels.size();
  const std::size_t count = n - window;
  ds.inputs.reserve(count * window * ds.channels);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t t = i; t < i + window; ++t)
      for (const auto& ch : channels) ds.inputs.push_back(ch[t]);
    ds.targets.push_back(channels.front()[i + window]);
    ds.label_index.push_back(i + window);
  }
  return ds;
}

namespace {

// Loss contribution and gradient of one sample, scaled by 1/batch.
double sample_gradient(const TcnModel& model, const WindowDataset& data, std::size_t sample,
                       const DropoutMasks* masks, double inv_batch, double* grad) {
  ForwardCache cache;
  forward_cached(model, data.input(sample), masks, cache);
  const double err = cache.prediction - data.targets[sample];
  backward(model, cache, masks, 2.0 * err * inv_batch, grad);
  return err * err;
}

}  // namespace

BatchGradient compute_gradients(const TcnModel& model, const WindowDataset& data,
                                std::span<const std::size_t> samples,
                                std::span<const DropoutMasks> masks, Exec exec) {
  if (samples.empty()) throw Error(Errc::EmptyDataset, "empty batch");
  if (!masks.empty() && masks.size() != samples.size())
    throw Error(Errc::ShapeMismatch, "one dropout mask set per sample");
  const std::size_t p = model.parameter_count();
  const std::size_t b = samples.size();
  const double inv_batch = 1.0 / static_cast<double>(b);

  // Per-sample buffers reduced in sample order keep both paths bitwise equal.
  std::vector<double> per_sample(b * p, 0.0);
  std::vector<double> sq_err(b, 0.0);
  auto one = [&](std::size_t j) {
    const DropoutMasks* m = masks.empty() ? nullptr : &masks[j];
    sq_err[j] = sample_gradient(model, data, samples[j], m, inv_batch, &per_sample[j * p]);
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(b); ++j)
      one(static_cast<std::size_t>(j));
  } else {
    for (std::size_t j = 0; j < b; ++j) one(j);
  }

  BatchGradient out;
  out.gradient.assign(p, 0.0);
  double loss = 0.0;
  for (std::size_t j = 0; j < b; ++j) {
    loss += sq_err[j];
    const double* g = &per_sample[j * p];
    for (std::size_t i = 0; i < p; ++i) out.gradient[i] += g[i];
  }
  out.loss = loss * inv_batch;
  return out;
}

double evaluate_loss(const TcnModel& model, const WindowDataset& data, Exec exec) {
  if (data.size() == 0) throw Error(Errc::EmptyDataset, "empty evaluation set");
  const auto pred = model.predict(data.inputs, exec);
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - data.targets[i];
    loss += e * e;
  }
  return loss / static_cast<double>(pred.size());
}

TrainResult train(TcnModel model, const WindowDataset& data, const WindowDataset& val,
                  Exec exec) {
  const TcnConfig cfg = model.config();
  if (data.size() == 0) throw Error(Errc::EmptyDataset, "no training samples");
  if (data.window != cfg.window || data.channels != cfg.input_channels)
    throw Error(Errc::ShapeMismatch, "dataset does not match model input shape");

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  const double keep_scale = 1.0 / (1.0 - cfg.dropout);

  const std::size_t p = model.parameter_count();
  std::vector<double> m(p, 0.0), v(p, 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}, {}, 0};
  double best = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  // Adam bounds the step size, so a blow-up can stay finite for a long time.
  const double blowup = 1e6 * std::max(1.0, evaluate_loss(model, data, exec));
  auto diverged = [](double loss, std::size_t epoch) {
    return Error(Errc::DivergedLoss, "loss " + std::to_string(loss) + " at epoch " +
                                         std::to_string(epoch + 1));
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);

      std::vector<DropoutMasks> masks;
      if (cfg.dropout > 0.0) {
        masks.resize(batch.size());
        for (auto& sample_masks : masks) {
          for (const auto& lv : model.levels()) {
            for (int stage = 0; stage < 2; ++stage) {
              std::vector<double> mask(cfg.window * lv.out_channels);
              for (auto& x : mask) x = keep(rng) ? keep_scale : 0.0;
              sample_masks.push_back(std::move(mask));
            }
          }
        }
      }

      const auto g = compute_gradients(model, data, batch, masks, exec);
      if (!std::isfinite(g.loss)) throw diverged(g.loss, epoch);
      epoch_loss += g.loss * static_cast<double>(batch.size());

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto params = model.parameters();
      for (std::size_t i = 0; i < p; ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g.gradient[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g.gradient[i] * g.gradient[i];
        params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
      }
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss) || epoch_loss > blowup) throw diverged(epoch_loss, epoch);
    result.train_loss.push_back(epoch_loss);

    double score = epoch_loss;
    if (val.size() > 0) {
      score = evaluate_loss(model, val, exec);
      if (!std::isfinite(score)) throw diverged(score, epoch);
      result.val_loss.push_back(score);
    }
    if (score < best) {
      best = score;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  if (cfg.epochs == 0) result.model = model;
  return result;
}

std::string to_checkpoint(const TcnModel& model) {
  const auto& cfg = model.config();
  nlohmann::json j;
  j["format"] = "blhybrid-tcn";
  j["version"] = 1;
  j["config"] = {{"kernel_size", cfg.kernel_size},   {"hidden_sizes", cfg.hidden_sizes},
                 {"dropout", cfg.dropout},           {"learning_rate", cfg.learning_rate},
                 {"epochs", cfg.epochs},             {"batch_size", cfg.batch_size},
                 {"seed", cfg.seed},                 {"window", cfg.window},
                 {"input_channels", cfg.input_channels},
                 {"last_value_skip", cfg.last_value_skip}};
  j["parameters"] = std::vector<double>(model.parameters().begin(), model.parameters().end());
  return j.dump();
}

TcnModel from_checkpoint(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::UnparsableRow, std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "blhybrid-tcn" || j.value("version", 0) != 1)
    throw Error(Errc::InvalidArgument, "unsupported checkpoint format");
  try {
    const auto& c = j.at("config");
    TcnConfig cfg;
    cfg.kernel_size = c.at("kernel_size").get<std::size_t>();
    cfg.hidden_sizes = c.at("hidden_sizes").get<std::vector<std::size_t>>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.epochs = c.at("epochs").get<std::size_t>();
    cfg.batch_size = c.at("batch_size").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.window = c.at("window").get<std::size_t>();
    cfg.input_channels = c.at("input_channels").get<std::size_t>();
    cfg.last_value_skip = c.at("last_value_skip").get<bool>();
    return TcnModel(cfg, j.at("parameters").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace blhybrid::tcn
