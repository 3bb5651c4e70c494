#include <gtest/gtest.h>

#include <set>

#include "ecad/genome.hpp"
#include "test_support.hpp"

using namespace ecad;
using testing_support::example_config;

namespace {

const CellState& dense(const NetworkGenome& g) { return *g.find_cell("dense00"); }

std::size_t changed_traits(const NetworkGenome& a, const NetworkGenome& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    for (const auto& [k, v] : a.cells[i].trait_values) {
      if (b.cells[i].trait_values.at(k) != v) ++n;
    }
  }
  return n;
}

NetworkGenome with_traits(const EcadConfig& cfg, std::int64_t neurons, std::int64_t bias) {
  Rng rng(1);
  auto g = spawn(cfg, rng, 1);
  for (auto& c : g.cells) {
    if (c.instance.kind == CellKind::kDense) {
      c.trait_values[traits::kNeurons] = neurons;
      c.trait_values[traits::kEnableBias] = bias;
    }
  }
  return g;
}

}  // namespace

TEST(Genome, SpawnStaysInsideDeclaredRanges) {
  const auto cfg = example_config();
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const auto g = spawn(cfg, rng, static_cast<GenomeId>(i + 1));
    ASSERT_TRUE(invariant_violations(g, cfg).empty());
    const auto& d = dense(g);
    const auto n = *d.trait(traits::kNeurons);
    EXPECT_GE(n, 2);
    EXPECT_LE(n, 1024);
    EXPECT_EQ(n % 2, 0);
    const auto b = *g.find_cell("X")->trait(traits::kBatchSize);
    EXPECT_TRUE(b >= 2 && b <= 1024 && b % 2 == 0);
  }
}

TEST(Genome, SpawnIsSeedDeterministic) {
  const auto cfg = example_config();
  Rng a(99), b(99), c(100);
  const auto ga = spawn(cfg, a, 1);
  const auto gb = spawn(cfg, b, 1);
  const auto gc = spawn(cfg, c, 1);
  EXPECT_EQ(ga, gb);
  EXPECT_FALSE(ga.same_traits(gc));
}

TEST(Genome, PowTraitCoversEveryPowerOfTwo) {
  const auto cfg = example_config();
  Rng rng(3);
  std::map<std::int64_t, int> seen;
  for (int i = 0; i < 10000; ++i) ++seen[*dense(spawn(cfg, rng, 1)).trait(traits::kSysVec)];
  const std::set<std::int64_t> want{2, 4, 8, 16, 32, 64};
  std::set<std::int64_t> got;
  for (const auto& [v, n] : seen) {
    got.insert(v);
    EXPECT_GT(n, 10000 / 6 / 2) << "value " << v;
  }
  EXPECT_EQ(got, want);
}

TEST(Genome, SingletonTraitIsConstant) {
  const auto cfg = example_config();
  Rng rng(5);
  auto g = spawn(cfg, rng, 1);
  for (int i = 0; i < 500; ++i) {
    g = mutate(g, cfg, rng, static_cast<GenomeId>(i + 2), i);
    ASSERT_EQ(*dense(g).trait(traits::kSystolicId), 0);
  }
}

TEST(Genome, MutationPreservesInvariants) {
  const auto cfg = example_config();
  Rng rng(11);
  auto g = spawn(cfg, rng, 1);
  for (int i = 0; i < 100000; ++i) {
    auto child = mutate(g, cfg, rng, static_cast<GenomeId>(i + 2), 1);
    ASSERT_FALSE(child.same_traits(g)) << "iteration " << i;
    const auto bad = invariant_violations(child, cfg);
    ASSERT_TRUE(bad.empty()) << bad.front();
    ASSERT_EQ(child.parent_id, g.id);
    ASSERT_EQ(child.cells.size(), g.cells.size());
    for (std::size_t c = 0; c < g.cells.size(); ++c) {
      ASSERT_EQ(child.cells[c].instance.name, g.cells[c].instance.name);
    }
    g = std::move(child);
  }
}

TEST(Genome, InterleaveChoicesForRows2Cols8) {
  const auto cfg = example_config();
  const auto* spec = cfg.cell_type(CellKind::kDense).trait(traits::kSysInterleave);
  ASSERT_NE(spec, nullptr);
  EXPECT_EQ(legal_interleaves(*spec, 2, 8), (std::vector<std::int64_t>{16, 32, 64, 128, 256}));
  EXPECT_TRUE(legal_interleaves(*spec, 200, 64).empty());
}

TEST(Genome, ZeroChangeRateStillChangesExactlyOneTrait) {
  auto cfg = example_config();
  cfg.def_change_rate = 0.0;
  for (auto& ct : cfg.cell_types) {
    for (auto& [name, spec] : ct.traits) spec.change_rate = 0.0;
  }
  Rng rng(17);
  const auto parent = spawn(cfg, rng, 1);
  for (int i = 0; i < 2000; ++i) {
    const auto child = mutate(parent, cfg, rng, 2, 1);
    ASSERT_EQ(changed_traits(parent, child), 1u);
    ASSERT_TRUE(invariant_violations(child, cfg).empty());
  }
}

TEST(Genome, DescriptionOfExampleGenome) {
  const auto cfg = example_config();
  const auto desc = to_description(with_traits(cfg, 852, 1));
  ASSERT_EQ(desc.layers.size(), 2u);
  EXPECT_EQ(desc.layers[0].in, 784);
  EXPECT_EQ(desc.layers[0].out, 852);
  EXPECT_EQ(desc.layers[0].activation, Activation::kRelu);
  EXPECT_TRUE(desc.layers[0].bias);
  EXPECT_EQ(desc.layers[1].in, 852);
  EXPECT_EQ(desc.layers[1].out, 10);
  EXPECT_EQ(desc.layers[1].activation, Activation::kNone);
  EXPECT_TRUE(desc.layers[1].bias);
  ASSERT_TRUE(desc.systolic.has_value());

  const auto nobias = to_description(with_traits(cfg, 64, 0));
  EXPECT_FALSE(nobias.layers[0].bias);
  EXPECT_FALSE(nobias.layers[1].bias);
}

TEST(Genome, DescriptionRoundTripIsFixedPoint) {
  const auto cfg = example_config();
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const auto g = spawn(cfg, rng, static_cast<GenomeId>(i + 1));
    const auto d1 = to_description(g);
    const auto g2 = from_description(d1, cfg, g.id);
    EXPECT_TRUE(g2.same_traits(g));
    EXPECT_EQ(to_json(to_description(g2)), to_json(d1));
  }
}

TEST(Genome, JsonRoundTrip) {
  const auto cfg = example_config();
  Rng rng(29);
  auto g = spawn(cfg, rng, 4);
  g = mutate(g, cfg, rng, 5, 3);
  EXPECT_EQ(genome_from_json(to_json(g)), g);
}

TEST(Genome, IllegalDescriptionIsRejected) {
  const auto cfg = example_config();
  auto desc = to_description(with_traits(cfg, 852, 1));
  desc.layers[0].out = 853;
  EXPECT_THROW(from_description(desc, cfg, 1), GenomeError);
}
