#include "eenas/cost_model.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace eenas;

namespace {

oracle::Macro to_oracle(const MacroConfig& m)
{
  return {m.total_cells, m.init_channels, m.input_resolution, m.inv_res_expansion, m.num_classes};
}

oracle::Network oracle_network(const Genotype& g, const MacroConfig& m)
{
  return space_of(g) == Space::cell_based ? oracle::cell_based_network(g, to_oracle(m))
                                          : oracle::nb201_network(g, to_oracle(m));
}

} // namespace

TEST(OpParams, FrozenValues)
{
  EXPECT_EQ(op_params(Operation::skip_connect, 16), 0u);
  EXPECT_EQ(op_params(Operation::max_pool_3x3, 16), 0u);
  EXPECT_EQ(op_params(Operation::avg_pool_3x3, 16), 0u);
  EXPECT_EQ(op_params(Operation::sep_conv_3x3, 16), 432u);
  EXPECT_EQ(op_params(Operation::dil_conv_3x3, 16), 432u);
  EXPECT_EQ(op_params(Operation::inv_res_3x3, 16, 6), 4352u);
  EXPECT_EQ(op_params(Operation::sep_conv_5x5, 16), 16u * 25 + 256 + 32);
}

TEST(OpParams, MatchesTensorEnumeration)
{
  for (int id = 0; id < kNumOperations; ++id)
    for (const std::uint64_t c : {1u, 16u, 48u})
      for (const std::uint64_t t : {1u, 6u, 16u})
      {
        const auto op = static_cast<Operation>(id);
        oracle::Network net;
        oracle::add_cell_op(net, "e", std::string(name(op)), c, 7 * 7, t);
        EXPECT_EQ(op_params(op, c, t), net.params()) << name(op);
        EXPECT_EQ(op_flops(op, c, 7, t), net.flops()) << name(op);
      }
}

TEST(OpFlops, FrozenValues)
{
  EXPECT_EQ(op_flops(Operation::skip_connect, 16, 32), 0u);
  EXPECT_EQ(op_flops(Operation::sep_conv_3x3, 16, 32), 409600u);
  EXPECT_EQ(op_flops(Operation::max_pool_3x3, 16, 32), 147456u);
}

TEST(Macro, ReductionPositionsAndValidation)
{
  EXPECT_EQ(MacroConfig{}.reduction_positions(), (std::array<int, 2>{2, 5}));
  EXPECT_EQ((MacroConfig{20, 36, 32, 6, 10}.reduction_positions()), (std::array<int, 2>{6, 13}));
  EXPECT_THROW((MacroConfig{2, 32, 32, 6, 10}.validate()), ConfigError);
  EXPECT_THROW((MacroConfig{8, 0, 32, 6, 10}.validate()), ConfigError);
  EXPECT_THROW((MacroConfig{8, 32, 7, 6, 10}.validate()), ConfigError);
  EXPECT_THROW(architecture_cost(all_skip_genotype(Space::cell_based), MacroConfig{8, 32, 4, 6, 10}),
               ConfigError);
}

TEST(ArchitectureCost, AllSkipIsStemPreprocessHead)
{
  const MacroConfig m{};
  const CostReport r = architecture_cost(all_skip_genotype(Space::cell_based), m);
  // hand sum: channels 32,32,64,64,64,128,128,128 after the reductions at 2 and 5
  const std::array<std::uint64_t, 8> c{32, 32, 64, 64, 64, 128, 128, 128};
  std::uint64_t in0 = 32, in1 = 32, pre = 0;
  for (int i = 0; i < 8; ++i)
  {
    pre += in0 * c[i] + 2 * c[i] + in1 * c[i] + 2 * c[i];
    in0 = in1;
    in1 = 4 * c[i];
  }
  const std::uint64_t stem = 27 * 32 + 2 * 32;
  const std::uint64_t head = 512 * 10 + 10;
  EXPECT_EQ(r.params, stem + pre + head);
  EXPECT_EQ(r.params, oracle_network(all_skip_genotype(Space::cell_based), m).params());
  EXPECT_EQ(r.stem_params, stem);
  EXPECT_EQ(r.head_params, head);
}

TEST(ArchitectureCost, MatchesOracleOnRandomGenotypes)
{
  const std::array<MacroConfig, 3> macros{MacroConfig{8, 32, 32, 6, 10},
                                          MacroConfig{20, 36, 32, 16, 10},
                                          MacroConfig{5, 16, 31, 4, 100}};
  Rng rng(7);
  for (const auto& m : macros)
    for (int i = 0; i < 50; ++i)
    {
      const Genotype g = random_genotype(rng, Space::cell_based);
      const auto net = oracle_network(g, m);
      const CostReport r = architecture_cost(g, m);
      ASSERT_EQ(r.params, net.params()) << serialize(g);
      ASSERT_EQ(r.flops, net.flops()) << serialize(g);
    }
}

TEST(ArchitectureCost, Nb201MatchesOracle)
{
  const std::array<MacroConfig, 2> macros{MacroConfig::defaults(Space::nb201),
                                          MacroConfig{8, 8, 16, 6, 100}};
  for (const auto& m : macros)
    for (std::size_t r = 0; r < kNb201SpaceSize; r += 97)
    {
      const Genotype g = nb201_from_rank(r);
      const auto net = oracle_network(g, m);
      ASSERT_EQ(architecture_cost(g, m).params, net.params()) << serialize(g);
      ASSERT_EQ(architecture_cost(g, m).flops, net.flops()) << serialize(g);
    }
}

TEST(ArchitectureCost, PerCellSumsToTotal)
{
  Rng rng(3);
  for (int i = 0; i < 20; ++i)
  {
    const CostReport r = architecture_cost(random_genotype(rng, Space::cell_based), MacroConfig{});
    std::uint64_t p = r.stem_params + r.head_params, f = r.stem_flops + r.head_flops;
    for (const auto& c : r.per_cell)
    {
      p += c.params;
      f += c.flops;
    }
    EXPECT_EQ(p, r.params);
    EXPECT_EQ(f, r.flops);
    EXPECT_EQ(r.per_cell.size(), 8u);
    EXPECT_TRUE(r.per_cell[2].reduction);
    EXPECT_TRUE(r.per_cell[5].reduction);
  }
}

TEST(ArchitectureCost, DoublingChannelsIncreasesParams)
{
  Rng rng(17);
  for (int i = 0; i < 50; ++i)
  {
    const Genotype g = random_genotype(rng, Space::cell_based);
    MacroConfig wide{};
    wide.init_channels *= 2;
    EXPECT_GT(architecture_cost(g, wide).params, architecture_cost(g, MacroConfig{}).params);
  }
}

TEST(ArchitectureCost, AddingWeightedEdgeNeverDecreasesParams)
{
  Rng rng(21);
  for (int i = 0; i < 200; ++i)
  {
    auto g = std::get<CellGenotype>(random_genotype(rng, Space::cell_based));
    const int p = static_cast<int>(rng.below(8));
    g.normal[p].op = static_cast<int>(Operation::skip_connect);
    const auto before = architecture_cost(g, MacroConfig{}).params;
    g.normal[p].op = static_cast<int>(rng.below(6)) + 2; // sep, dil or inv_res
    EXPECT_GT(architecture_cost(g, MacroConfig{}).params, before);
  }
}

TEST(ArchitectureCost, BodyFlopsScaleByFourWhenResolutionDoubles)
{
  // the classifier head runs after global pooling, so only the body scales
  Rng rng(4);
  for (int i = 0; i < 50; ++i)
  {
    const Genotype g = random_genotype(rng, Space::cell_based);
    MacroConfig big{};
    big.input_resolution = 64;
    const auto a = architecture_cost(g, MacroConfig{});
    const auto b = architecture_cost(g, big);
    EXPECT_EQ(b.flops - b.head_flops, 4 * (a.flops - a.head_flops));
    EXPECT_EQ(b.head_flops, a.head_flops);
    EXPECT_EQ(b.params, a.params);
  }
}

TEST(ArchitectureCost, InvariantUnderRoundTrip)
{
  Rng rng(8);
  for (int i = 0; i < 50; ++i)
  {
    const Genotype g = random_genotype(rng, Space::cell_based);
    const auto a = architecture_cost(g, MacroConfig{});
    const auto b = architecture_cost(parse(serialize(g)), MacroConfig{});
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.flops, b.flops);
  }
}

TEST(ArchitectureCost, InvalidGenotypeThrows)
{
  CellGenotype g = std::get<CellGenotype>(all_skip_genotype(Space::cell_based));
  g.normal[0].index = 1;
  EXPECT_THROW(architecture_cost(g, MacroConfig{}), EncodingError);
}

TEST(CostJson, ExportsTotalsAndCells)
{
  const auto j = to_json(architecture_cost(all_skip_genotype(Space::cell_based), MacroConfig{}));
  EXPECT_TRUE(j.contains("params_m"));
  EXPECT_TRUE(j.contains("flops_m"));
  ASSERT_TRUE(j.at("per_cell").is_array());
  EXPECT_EQ(j.at("per_cell").size(), 8u);
}
