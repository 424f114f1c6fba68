#include <doctest.h>

#include <numeric>

#include "blhybrid/tcn.hpp"
#include "helpers.hpp"

using namespace blhybrid;
using testutil::error_of;

namespace {

tcn::TcnConfig small_config(std::vector<std::size_t> hidden = {8, 8}, std::uint64_t seed = 3) {
  tcn::TcnConfig c;
  c.hidden_sizes = std::move(hidden);
  c.kernel_size = 2;
  c.seed = seed;
  c.window = 7;
  return c;
}

std::vector<std::vector<double>> random_channels(std::size_t n, std::uint64_t seed) {
  std::vector<std::vector<double>> ch;
  for (std::size_t c = 0; c < 5; ++c) ch.push_back(testutil::gaussian(n, seed * 10 + c));
  return ch;
}

// Learnable task: target is a smooth sinusoid, related channels are shifted copies.
tcn::WindowDataset sine_dataset(std::size_t n) {
  std::vector<std::vector<double>> ch(5, std::vector<double>(n));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < 5; ++c) ch[c][t] = std::sin(0.3 * t + 0.2 * c);
  return tcn::make_windows(ch, 7);
}

std::vector<std::size_t> all_samples(const tcn::WindowDataset& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double batch_loss(const tcn::TcnModel& m, const tcn::WindowDataset& d,
                  std::span<const std::size_t> idx, std::span<const tcn::DropoutMasks> masks) {
  return tcn::compute_gradients(m, d, idx, masks, Exec::Serial).loss;
}

tcn::Sequence seq(std::vector<double> v) {
  tcn::Sequence s(v.size(), 1);
  s.data = std::move(v);
  return s;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = small_config();
  CHECK_NOTHROW(c.validate());
  c.kernel_size = 1;
  CHECK(error_of([&] { c.validate(); }) == Errc::InvalidArgument);
  c = small_config({});
  CHECK(error_of([&] { c.validate(); }) == Errc::InvalidArgument);
  c = small_config();
  c.learning_rate = 0;
  CHECK(error_of([&] { c.validate(); }) == Errc::InvalidArgument);
  c = small_config();
  c.dropout = 1.0;
  CHECK(error_of([&] { c.validate(); }) == Errc::InvalidArgument);
}

TEST_CASE("make_windows") {
  std::vector<std::vector<double>> ch(5, std::vector<double>(10));
  std::iota(ch[0].begin(), ch[0].end(), 1.0);
  const auto d = tcn::make_windows(ch, 7);
  CHECK(d.size() == 3);
  CHECK(d.targets == std::vector<double>{8, 9, 10});
  CHECK(d.input(1)[0] == 2.0);
  CHECK(d.input(1)[5 * 6] == 8.0);
  CHECK(d.label_index == std::vector<std::size_t>{7, 8, 9});
  CHECK(d.select_labels(8, 10).targets == std::vector<double>{9, 10});
  CHECK(error_of([&] { tcn::make_windows(ch, 10); }) == Errc::TooShort);
  ch[2].pop_back();
  CHECK(error_of([&] { tcn::make_windows(ch, 3); }) == Errc::ShapeMismatch);
}

TEST_CASE("causal_conv") {
  const auto x = seq({1, 2, 3});
  const std::vector<double> zero_bias{0.0};
  CHECK(tcn::causal_conv(x, std::vector<double>{1, 0}, zero_bias, 1, 2, 1).data == x.data);
  CHECK(tcn::causal_conv(x, std::vector<double>{0, 1}, zero_bias, 1, 2, 1).data ==
        std::vector<double>{0, 1, 2});
  CHECK(tcn::causal_conv(seq({1, 2, 3, 4}), std::vector<double>{0, 1}, zero_bias, 1, 2, 2).data ==
        std::vector<double>{0, 0, 1, 2});
  CHECK(tcn::causal_conv(x, std::vector<double>{1, 1}, std::vector<double>{0.5}, 1, 2, 1).data ==
        std::vector<double>{1.5, 3.5, 5.5});

  // two input channels summed into one output, one per tap
  tcn::Sequence two(3, 2);
  two.data = {1, 10, 2, 20, 3, 30};
  CHECK(tcn::causal_conv(two, std::vector<double>{1, 0, 0, 1}, zero_bias, 1, 2, 1).data ==
        std::vector<double>{1, 12, 23});
  CHECK(error_of([&] { tcn::causal_conv(x, std::vector<double>{1}, zero_bias, 1, 2, 1); }) ==
        Errc::ShapeMismatch);
}

TEST_CASE("residual_block") {
  auto cfg = small_config({5});
  tcn::TcnModel zero(cfg, std::vector<double>(tcn::TcnModel(cfg).parameter_count(), 0.0));
  CHECK_FALSE(zero.levels()[0].has_downsample);
  tcn::Sequence in(7, 5);
  const auto g = testutil::gaussian(in.data.size(), 1);
  in.data = g;
  const auto out = zero.residual_block(in, 0);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(out.data[i] == std::max(0.0, g[i]));

  tcn::TcnModel model(small_config({8, 4}));
  CHECK(model.levels()[0].has_downsample);
  const auto a = model.residual_block(in, 0);
  CHECK(a.steps == 7);
  CHECK(a.channels == 8);
  CHECK(model.residual_block(in, 0).data == a.data);
  CHECK(model.residual_block(a, 1).steps == 7);
}

TEST_CASE("forward") {
  auto cfg = small_config();
  tcn::TcnModel model(cfg);
  auto params = model.parameters();
  params[model.head_bias()] = 0.0;
  std::vector<double> window(cfg.window * 5, 0.0);
  // zero window: every block output is ReLU of biases, so zero all biases too
  tcn::TcnModel zeroed(cfg, std::vector<double>(model.parameters().begin(), model.parameters().end()));
  for (const auto& lv : zeroed.levels()) {
    auto p = zeroed.parameters();
    std::fill_n(p.begin() + lv.conv1_b, lv.out_channels, 0.0);
    std::fill_n(p.begin() + lv.conv2_b, lv.out_channels, 0.0);
    if (lv.has_downsample) std::fill_n(p.begin() + lv.down_b, lv.out_channels, 0.0);
  }
  CHECK(zeroed.forward(window) == 0.0);

  const auto w = testutil::gaussian(cfg.window * 5, 5);
  CHECK(model.forward(w) == model.forward(w));
  CHECK(std::isfinite(model.forward(w)));
  CHECK(error_of([&] { model.forward(std::span<const double>(w).first(10)); }) ==
        Errc::ShapeMismatch);
}

TEST_CASE("causality and receptive field") {
  // one level, kernel 2: receptive field 3 inside a window of 7
  auto cfg = small_config({6});
  tcn::TcnModel model(cfg);
  const std::size_t rf = model.receptive_field();
  CHECK(rf == 3);
  CHECK(tcn::TcnModel(small_config({8, 8})).receptive_field() == 7);
  CHECK(tcn::TcnModel(small_config({4, 4, 4})).receptive_field() == 15);

  const auto w = testutil::gaussian(cfg.window * 5, 9);
  const double base = model.forward(w);
  std::size_t horizon = 0;
  for (std::size_t step = 0; step < cfg.window; ++step) {
    auto p = w;
    for (std::size_t c = 0; c < 5; ++c) p[step * 5 + c] += 1.0;
    if (model.forward(p) != base) horizon = std::max(horizon, cfg.window - step);
    else CHECK(step + rf < cfg.window);
  }
  CHECK(horizon == rf);

  // per-level: outputs up to s are untouched by inputs after s
  tcn::TcnModel deep(small_config({8, 8}));
  tcn::Sequence in(7, 5);
  in.data = testutil::gaussian(35, 2);
  const auto l0 = deep.residual_block(in, 0);
  const auto l1 = deep.residual_block(l0, 1);
  for (std::size_t s = 0; s + 1 < 7; ++s) {
    auto pin = in;
    for (std::size_t t = s + 1; t < 7; ++t)
      for (std::size_t c = 0; c < 5; ++c) pin.at(t, c) += 3.0;
    const auto p0 = deep.residual_block(pin, 0);
    const auto p1 = deep.residual_block(p0, 1);
    for (std::size_t t = 0; t <= s; ++t)
      for (std::size_t c = 0; c < 8; ++c) {
        CHECK(p0.at(t, c) == l0.at(t, c));
        CHECK(p1.at(t, c) == l1.at(t, c));
      }
  }
}

TEST_CASE("gradients match central differences") {
  auto cfg = small_config({8, 8}, 21);
  tcn::TcnModel model(cfg);
  const auto data = tcn::make_windows(random_channels(40, 4), cfg.window);
  const auto idx = all_samples(data);

  for (bool dropout : {false, true}) {
    std::vector<tcn::DropoutMasks> masks;
    if (dropout) {
      std::mt19937_64 rng(8);
      std::bernoulli_distribution keep(0.8);
      masks.resize(idx.size());
      for (auto& m : masks)
        for (const auto& lv : model.levels())
          for (int s = 0; s < 2; ++s) {
            std::vector<double> v(cfg.window * lv.out_channels);
            for (auto& x : v) x = keep(rng) ? 1.25 : 0.0;
            m.push_back(std::move(v));
          }
    }
    const auto g = tcn::compute_gradients(model, data, idx, masks, Exec::Serial);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, model.parameter_count() - 1);
    const double h = 1e-5;
    for (int trial = 0; trial < 120; ++trial) {
      const auto i = pick(rng);
      tcn::TcnModel plus = model, minus = model;
      plus.parameters()[i] += h;
      minus.parameters()[i] -= h;
      const double numeric = (batch_loss(plus, data, idx, masks) - batch_loss(minus, data, idx, masks)) / (2 * h);
      const double analytic = g.gradient[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      INFO("param " << i << " analytic " << analytic << " numeric " << numeric);
      CHECK(std::abs(analytic - numeric) / denom <= 1e-4);
    }
  }
}

TEST_CASE("gradient edge cases") {
  auto cfg = small_config({4});
  tcn::TcnModel model(cfg, std::vector<double>(tcn::TcnModel(cfg).parameter_count(), 0.0));
  std::vector<std::vector<double>> zeros(5, std::vector<double>(20, 0.0));
  const auto zd = tcn::make_windows(zeros, cfg.window);
  const auto g = tcn::compute_gradients(model, zd, all_samples(zd));
  CHECK(g.loss == 0.0);
  for (double v : g.gradient) CHECK(v == 0.0);

  tcn::TcnModel random(small_config());
  const auto data = tcn::make_windows(random_channels(30, 7), 7);
  auto idx = all_samples(data);
  const auto once = tcn::compute_gradients(random, data, idx, {}, Exec::Serial);
  auto twice_idx = idx;
  twice_idx.insert(twice_idx.end(), idx.begin(), idx.end());
  const auto twice = tcn::compute_gradients(random, data, twice_idx, {}, Exec::Serial);
  CHECK(testutil::max_abs_diff(once.gradient, twice.gradient) <= 1e-10);
  CHECK(error_of([&] { tcn::compute_gradients(random, data, std::vector<std::size_t>{}); }) ==
        Errc::EmptyDataset);
}

TEST_CASE("serial and parallel agree bitwise") {
  tcn::TcnModel model(small_config({16, 16}));
  const auto data = tcn::make_windows(random_channels(200, 3), 7);
  const auto idx = all_samples(data);
  const auto s = tcn::compute_gradients(model, data, idx, {}, Exec::Serial);
  const auto p = tcn::compute_gradients(model, data, idx, {}, Exec::Parallel);
  CHECK(s.loss == p.loss);
  CHECK(s.gradient == p.gradient);
  CHECK(model.predict(data.inputs, Exec::Serial) == model.predict(data.inputs, Exec::Parallel));
  CHECK(tcn::evaluate_loss(model, data, Exec::Serial) == tcn::evaluate_loss(model, data, Exec::Parallel));
}

TEST_CASE("training") {
  auto cfg = small_config({8, 8}, 17);
  cfg.epochs = 60;
  cfg.learning_rate = 3e-3;
  const auto data = sine_dataset(200);
  const auto r = tcn::train(tcn::TcnModel(cfg), data, {});
  REQUIRE(r.train_loss.size() == 60);
  CHECK(r.train_loss.back() <= 0.5 * r.train_loss.front());
  CHECK(r.val_loss.empty());
  CHECK(tcn::evaluate_loss(r.model, data) ==
        doctest::Approx(*std::min_element(r.train_loss.begin(), r.train_loss.end())).epsilon(0.5));

  const auto again = tcn::train(tcn::TcnModel(cfg), data, {});
  CHECK(again.train_loss == r.train_loss);
  CHECK(std::equal(again.model.parameters().begin(), again.model.parameters().end(),
                   r.model.parameters().begin()));

  auto dcfg = cfg;
  dcfg.dropout = 0.2;
  dcfg.epochs = 5;
  const auto d1 = tcn::train(tcn::TcnModel(dcfg), data, data.select_labels(150, 200));
  const auto d2 = tcn::train(tcn::TcnModel(dcfg), data, data.select_labels(150, 200));
  CHECK(d1.val_loss == d2.val_loss);
  CHECK(d1.val_loss.size() == 5);
  CHECK(d1.best_epoch < 5);
  CHECK(d1.val_loss[d1.best_epoch] == *std::min_element(d1.val_loss.begin(), d1.val_loss.end()));
}

TEST_CASE("constant target is learned") {
  auto cfg = small_config({8, 8}, 2);
  cfg.epochs = 100;
  std::vector<std::vector<double>> ch(5, std::vector<double>(120, 0.7));
  const auto d = tcn::make_windows(ch, 7);
  const auto r = tcn::train(tcn::TcnModel(cfg), d, {});
  CHECK(r.train_loss.back() < 1e-3);
}

TEST_CASE("training errors") {
  auto cfg = small_config();
  CHECK(error_of([&] { tcn::train(tcn::TcnModel(cfg), tcn::WindowDataset{}, {}); }) ==
        Errc::EmptyDataset);
  cfg.learning_rate = 1e3;
  cfg.epochs = 100;
  const auto data = tcn::make_windows(random_channels(200, 12), 7);
  CHECK(error_of([&] { tcn::train(tcn::TcnModel(cfg), data, {}); }) == Errc::DivergedLoss);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  auto cfg = small_config({8, 16}, 99);
  cfg.dropout = 0.1;
  tcn::TcnModel model(cfg);
  model.parameters()[0] = 0.1 + 0.2;  // not exactly representable in short decimal
  model.parameters()[1] = std::nextafter(1.0, 2.0);
  const auto text = tcn::to_checkpoint(model);
  const auto back = tcn::from_checkpoint(text);
  CHECK(back.config().hidden_sizes == cfg.hidden_sizes);
  CHECK(back.config().seed == cfg.seed);
  CHECK(back.config().dropout == cfg.dropout);
  REQUIRE(back.parameter_count() == model.parameter_count());
  CHECK(std::equal(back.parameters().begin(), back.parameters().end(),
                   model.parameters().begin()));
  CHECK(tcn::to_checkpoint(back) == text);
  CHECK(error_of([] { tcn::from_checkpoint("{not json"); }) == Errc::UnparsableRow);
  CHECK(error_of([] { tcn::from_checkpoint(R"({"format":"other"})"); }) == Errc::InvalidArgument);

  CHECK(error_of([&] { tcn::TcnModel(cfg, std::vector<double>(3, 0.0)); }) == Errc::ShapeMismatch);
}
