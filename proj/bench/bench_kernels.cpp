#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "blhybrid/kernels.hpp"
#include "blhybrid/tcn.hpp"

using namespace blhybrid;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

void BM_Gram(benchmark::State& state, Exec exec) {
  const auto n = state.range(0);
  const auto a = random_matrix(n, 4 * n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::gram_rows(a, exec));
}

void BM_HankelAverage(benchmark::State& state, Exec exec) {
  const auto n = state.range(0);
  const auto l = random_matrix(n, 10, 2);
  const auto r = random_matrix(3 * n, 10, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::hankel_average(l, r, exec));
}

void BM_TcnGradients(benchmark::State& state, Exec exec) {
  tcn::TcnConfig cfg;
  cfg.hidden_sizes = {32, 32};
  tcn::TcnModel model(cfg);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> ch(cfg.input_channels, std::vector<double>(n + cfg.window));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (auto& c : ch)
    for (auto& v : c) v = g(rng);
  const auto data = tcn::make_windows(ch, cfg.window);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (auto _ : state) benchmark::DoNotOptimize(tcn::compute_gradients(model, data, idx, {}, exec));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Gram, serial, Exec::Serial)->Arg(64)->Arg(200);
BENCHMARK_CAPTURE(BM_Gram, omp, Exec::Parallel)->Arg(64)->Arg(200);
BENCHMARK_CAPTURE(BM_HankelAverage, serial, Exec::Serial)->Arg(100)->Arg(250);
BENCHMARK_CAPTURE(BM_HankelAverage, omp, Exec::Parallel)->Arg(100)->Arg(250);
BENCHMARK_CAPTURE(BM_TcnGradients, serial, Exec::Serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_TcnGradients, omp, Exec::Parallel)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
