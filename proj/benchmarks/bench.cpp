#include <benchmark/benchmark.h>

#include <random>

#include "ecad/hwmodel.hpp"
#include "ecad/nnsim.hpp"
#include "ecad/sysarray.hpp"

using namespace ecad;

namespace {

NetworkDescription four_layer_net(std::int64_t batch) {
  NetworkDescription d;
  d.id = "bench";
  d.batch = batch;
  d.layers = {{"dense00", 784, 196, Activation::kRelu, true},
              {"dense01", 196, 190, Activation::kRelu, true},
              {"dense02", 190, 150, Activation::kRelu, true},
              {"output", 150, 10, Activation::kNone, true}};
  d.systolic = SystolicConfig{4, 4, 8, 8, 8};
  return d;
}

Matrix<float> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  Matrix<float> m(r, c);
  for (auto& v : m.data()) v = d(rng);
  return m;
}

void BM_HwEstimate(benchmark::State& state) {
  const auto desc = four_layer_net(state.range(0));
  const HwConfig hw{"Arria10-1150", 1518, 250, 54260, 1, 2400, 8};
  for (auto _ : state) benchmark::DoNotOptimize(hw::estimate(desc, *desc.systolic, hw));
}
BENCHMARK(BM_HwEstimate)->Arg(1)->Arg(2048);

void BM_SimulateLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_layer(a, b, {4, 4, 8, 8, 8}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_SimulateLayer)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  NetworkDescription desc;
  desc.batch = 100;
  desc.layers = {{"dense00", 784, 128, Activation::kRelu, true}, {"output", 128, 10, Activation::kNone, true}};
  const auto net = nn::Mlp<float>::init(desc, 1);
  const auto x = random_matrix(100, 784, 3);
  Matrix<float> y(100, 10);
  for (std::size_t i = 0; i < 100; ++i) y(i, i % 10) = 1.0f;
  for (auto _ : state) benchmark::DoNotOptimize(net.grad(x, y));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
