#include <gtest/gtest.h>

#include <random>

#include "ecad/hwmodel.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ecad;

namespace {

HwConfig arria() {
  HwConfig hw;
  hw.device_type = "Arria10-1150";
  hw.dsp = 1518;
  hw.freq_mhz = 250;
  hw.sram_kbit = 54260;
  hw.mem_banks = 1;
  hw.mem_speed_mts = 2400;
  hw.mem_rate_bytes = 8;
  return hw;
}

NetworkDescription mlp(std::vector<std::int64_t> widths, std::int64_t batch) {
  NetworkDescription d;
  d.id = "t";
  d.batch = batch;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    d.layers.push_back({"l" + std::to_string(i), widths[i], widths[i + 1],
                        i + 2 < widths.size() ? Activation::kRelu : Activation::kNone, true});
  }
  return d;
}

}  // namespace

TEST(HwModel, PaddingEfficiencyAnchors) {
  const SystolicConfig cfg{4, 8, 8, 16, 18};
  const auto g = hw::block_geometry(cfg, 1024, 784, 10);
  EXPECT_EQ(g.common_block, 144);
  EXPECT_EQ(g.k_pad, 864);
  EXPECT_NEAR(g.k_efficiency(), 784.0 / 864.0, 1e-15);
  EXPECT_EQ(g.block_height, 64);
  EXPECT_EQ(g.m_pad, 1024);
  EXPECT_EQ(g.m_efficiency(), 1.0);
}

TEST(HwModel, PotentialThroughput) {
  EXPECT_DOUBLE_EQ(hw::potential_gops({4, 4, 8, 8, 8}, 250), 64.0);
  EXPECT_DOUBLE_EQ(hw::potential_gops({1, 1, 1, 1, 1}, 1), 0.002);
}

TEST(HwModel, ResourceBudget) {
  const auto ok = hw::resource_estimate({2, 8, 32, 16, 2}, arria());
  EXPECT_DOUBLE_EQ(ok.dsp, 544);
  EXPECT_TRUE(ok.feasible);
  const auto big = hw::resource_estimate({64, 64, 64, 2, 2}, arria());
  EXPECT_DOUBLE_EQ(big.dsp, 262176);
  EXPECT_FALSE(big.feasible);
  EXPECT_DOUBLE_EQ(hw::resource_estimate({4, 4, 8, 8, 8}, arria()).dsp, 160);
}

TEST(HwModel, CycleFormulaHandValue) {
  const SystolicConfig cfg{4, 4, 8, 8, 8};
  const auto g = hw::block_geometry(cfg, 2048, 784, 196);
  EXPECT_EQ(hw::compute_cycles(cfg, g), 2981888);
  EXPECT_EQ(hw::compute_cycles(cfg, g), oracle::count_cycles(4, 4, 8, 8, 8, 2048, 784, 196));
}

TEST(HwModel, CycleFormulaMatchesLoopWalk) {
  std::mt19937_64 rng(3);
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  auto pow2 = [&](int lo, int hi) { return std::int64_t{1} << pick(lo, hi); };
  for (int i = 0; i < 200; ++i) {
    const SystolicConfig cfg{pick(1, 8), pow2(0, 3), pow2(0, 4), pow2(0, 4), pick(1, 4)};
    const auto m = pick(1, 300), k = pick(1, 300), n = pick(1, 300);
    const auto g = hw::block_geometry(cfg, m, k, n);
    EXPECT_EQ(hw::compute_cycles(cfg, g),
              oracle::count_cycles(cfg.rows, cfg.cols, cfg.vec, cfg.interleave, cfg.scale, m, k, n));
  }
}

TEST(HwModel, OpsIdentity) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto batch = std::int64_t{1} << std::uniform_int_distribution<int>(0, 11)(rng);
    const auto hidden = std::uniform_int_distribution<std::int64_t>(2, 1024)(rng);
    const auto desc = mlp({784, hidden, 10}, batch);
    const auto est = hw::estimate(desc, {2, 8, 16, 16, 2}, arria());
    EXPECT_NEAR(est.effective_gops * 1e9 * est.total_time_ms / 1e3, est.total_ops,
                est.total_ops * 1e-9);
    EXPECT_DOUBLE_EQ(est.total_ops, 2.0 * batch * (784 * hidden + hidden * 10));
    EXPECT_LE(est.effective_gops, est.potential_gops * (1 + 1e-12));
    EXPECT_NEAR(est.img_per_s, batch / (est.total_time_ms / 1e3), est.img_per_s * 1e-9);
  }
}

TEST(HwModel, EfficiencyFactorization) {
  auto hw = arria();
  hw.mem_speed_mts = 1e12;  // remove the bandwidth bound
  HwModelConfig model;
  model.drain_overlap = true;
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto m = std::uniform_int_distribution<std::int64_t>(1, 2048)(rng);
    const auto k = std::uniform_int_distribution<std::int64_t>(1, 1024)(rng);
    const auto n = std::uniform_int_distribution<std::int64_t>(1, 1024)(rng);
    const SystolicConfig cfg{4, 4, 8, 8, 8};
    NetworkDescription d = mlp({k, n}, m);
    const auto est = hw::estimate(d, cfg, hw, model);
    const auto g = hw::block_geometry(cfg, m, k, n);
    EXPECT_NEAR(est.effective_gops / est.potential_gops,
                g.m_efficiency() * g.k_efficiency() * g.n_efficiency(), 1e-12);
  }
}

TEST(HwModel, SerializedDrainIsSlowerThanOverlap) {
  const auto desc = mlp({784, 196, 190, 150, 10}, 2048);
  HwModelConfig overlap;
  overlap.drain_overlap = true;
  const auto a = hw::estimate(desc, {4, 4, 8, 8, 8}, arria());
  const auto b = hw::estimate(desc, {4, 4, 8, 8, 8}, arria(), overlap);
  EXPECT_GT(a.total_time_ms, b.total_time_ms);
}

TEST(HwModel, BatchSweepIsNondecreasingUnderPotential) {
  double prev = 0;
  for (std::int64_t batch = 1; batch <= 2048; batch *= 2) {
    const auto est = hw::estimate(mlp({784, 196, 190, 150, 10}, batch), {4, 4, 8, 8, 8}, arria());
    EXPECT_GE(est.effective_gops, prev - 1e-12) << "batch " << batch;
    EXPECT_LT(est.effective_gops, 64.0);
    prev = est.effective_gops;
  }
}

TEST(HwModel, MetricsMapKeys) {
  const auto est = hw::estimate(mlp({784, 128, 10}, 100), {2, 8, 16, 16, 2}, arria());
  const auto m = est.metrics();
  for (const char* k : {"total_time_ms", "potential_gops", "effective_gops", "img_per_s",
                        "latency_ms", "dsp_est", "mem_kb_est", "feasible"}) {
    EXPECT_TRUE(m.contains(k)) << k;
  }
  EXPECT_EQ(m.at("feasible"), 1.0);
}
