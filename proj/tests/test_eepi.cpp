#include "eenas/eepi.hpp"

#include <gtest/gtest.h>

using namespace eenas;

TEST(EarlyExit, Branches)
{
  EXPECT_EQ(early_exit(2.9, 3.0), 1);
  EXPECT_EQ(early_exit(3.0, 3.0), 1);
  EXPECT_EQ(early_exit(3.6, 3.0), 0);
  EXPECT_EQ(early_exit(1e9, 0.0), 1);
}

TEST(InitializePopulation, BetaZeroReturnsRawSamples)
{
  const EarlyExitConfig cfg{};
  const auto pop = initialize_population(40, cfg, Space::cell_based, 5, 1);
  ASSERT_EQ(pop.size(), 40u);
  for (std::size_t i = 0; i < pop.size(); ++i)
  {
    Rng rng(derive_seed(5, {1, i}));
    EXPECT_EQ(pop[i].genotype, random_genotype(rng, Space::cell_based));
    ASSERT_TRUE(pop[i].cost);
    EXPECT_DOUBLE_EQ(pop[i].cost->params_m, architecture_cost(pop[i].genotype, cfg.macro).params_m());
    EXPECT_FALSE(pop[i].objectives);
  }
}

TEST(InitializePopulation, BetaThreeBoundsEveryMember)
{
  EarlyExitConfig cfg{};
  cfg.beta = 3.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (const auto& m : initialize_population(40, cfg, Space::cell_based, seed))
      EXPECT_LE(architecture_cost(m.genotype, cfg.macro).params_m(), 3.0);
}

TEST(InitializePopulation, BetaFiveUnderEvaluationMacro)
{
  EarlyExitConfig cfg{};
  cfg.beta = 5.0;
  for (const auto& m : initialize_population(40, cfg, Space::cell_based, 1))
    EXPECT_LE(m.cost->params_m, 5.0);
}

TEST(InitializePopulation, BelowFloorIsInfeasible)
{
  EarlyExitConfig cfg{};
  const double floor = architecture_cost(all_skip_genotype(Space::cell_based), cfg.macro).params_m();
  cfg.beta = floor * 0.99;
  cfg.max_attempts_per_slot = 500;
  try
  {
    initialize_population(4, cfg, Space::cell_based, 0);
    FAIL() << "expected BudgetInfeasible";
  }
  catch (const BudgetInfeasible& e)
  {
    EXPECT_DOUBLE_EQ(e.beta(), cfg.beta);
    EXPECT_EQ(e.attempts(), 500);
    EXPECT_GE(e.min_params_seen(), floor);
    EXPECT_NE(std::string(e.what()).find("budget infeasible"), std::string::npos);
  }
}

TEST(InitializePopulation, ConstrainedMeanParamsBelowUnconstrained)
{
  EarlyExitConfig open{}, tight{};
  tight.beta = 3.0;
  int lower = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
  {
    double a = 0, b = 0;
    for (const auto& m : initialize_population(40, tight, Space::cell_based, seed))
      a += m.cost->params_m;
    for (const auto& m : initialize_population(40, open, Space::cell_based, seed))
      b += m.cost->params_m;
    lower += a <= b;
  }
  EXPECT_EQ(lower, 20);
}

TEST(InitializePopulation, DeterministicBySeedAndStream)
{
  EarlyExitConfig cfg{};
  cfg.beta = 2.5;
  const auto a = initialize_population(10, cfg, Space::cell_based, 9, 1);
  const auto b = initialize_population(10, cfg, Space::cell_based, 9, 1);
  const auto c = initialize_population(10, cfg, Space::cell_based, 9, 2);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    EXPECT_EQ(a[i].genotype, b[i].genotype);
    any_diff = any_diff || !(a[i].genotype == c[i].genotype);
  }
  EXPECT_TRUE(any_diff);
}

TEST(InitializePopulation, ContractChecks)
{
  EXPECT_THROW(initialize_population(0, {}, Space::cell_based, 0), ContractViolation);
  EarlyExitConfig bad{};
  bad.beta = -1.0;
  EXPECT_THROW(initialize_population(1, bad, Space::cell_based, 0), ConfigError);
  bad.beta = 0.0;
  bad.max_attempts_per_slot = 0;
  EXPECT_THROW(initialize_population(1, bad, Space::cell_based, 0), ConfigError);
}
