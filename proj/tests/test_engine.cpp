#include "eenas/engine.hpp"
#include "eenas/external_evaluator.hpp"
#include "eenas/run_log.hpp"

#include <gtest/gtest.h>

#include <mutex>
#include <set>
#include <sstream>

using namespace eenas;
using namespace std::chrono_literals;

namespace {

EngineConfig small_config(std::uint64_t seed)
{
  EngineConfig c;
  c.population = 16;
  c.generations = 5;
  c.seed = seed;
  return c;
}

SurrogateEvaluator surrogate(Space s = Space::cell_based)
{
  return SurrogateEvaluator(MacroConfig::defaults(s), SurrogateParams::for_space(s));
}

/// Counts calls per genotype.
class CountingEvaluator final : public Evaluator
{
public:
  EvaluationResult evaluate(const EvaluationRequest& req) override
  {
    {
      std::lock_guard lock(mutex_);
      ++calls_[req.genotype];
      ids_.insert(req.id);
    }
    return inner_.evaluate(req);
  }
  std::map<std::string, int> calls_;
  std::set<std::uint64_t> ids_;

private:
  std::mutex mutex_;
  SurrogateEvaluator inner_ = surrogate();
};

std::string log_text(const std::vector<GenerationRecord>& records)
{
  std::ostringstream os;
  for (const auto& r : records)
    write_record(os, r);
  return os.str();
}

} // namespace

TEST(Engine, PopulationSizeAndRecordCount)
{
  auto ev = surrogate();
  const auto cfg = small_config(1);
  const auto res = run_search(cfg, ev, {}, [](std::string_view) {});
  EXPECT_EQ(res.records.size(), 5u);
  EXPECT_EQ(res.population.size(), 16u);
  for (std::size_t g = 0; g < res.records.size(); ++g)
  {
    EXPECT_EQ(res.records[g].generation, static_cast<int>(g) + 1);
    EXPECT_EQ(res.records[g].population.size(), 16u);
  }
  EXPECT_FALSE(res.front0.empty());
  for (const auto& m : res.front0)
    EXPECT_EQ(m.rank, 0);
}

TEST(Engine, DeterministicRecords)
{
  auto ev = surrogate();
  const auto a = run_search(small_config(7), ev, {}, [](std::string_view) {});
  const auto b = run_search(small_config(7), ev, {}, [](std::string_view) {});
  EXPECT_EQ(log_text(a.records), log_text(b.records));
  const auto c = run_search(small_config(8), ev, {}, [](std::string_view) {});
  EXPECT_NE(log_text(a.records), log_text(c.records));
}

TEST(Engine, WorkerCountDoesNotChangeResults)
{
  auto ev = surrogate();
  auto cfg = small_config(3);
  const auto serial = run_search(cfg, ev, {}, [](std::string_view) {});
  cfg.workers = 4;
  const auto parallel = run_search(cfg, ev, {}, [](std::string_view) {});
  EXPECT_EQ(log_text(serial.records), log_text(parallel.records));
}

TEST(Engine, CacheEvaluatesEachGenotypeOnce)
{
  CountingEvaluator ev;
  auto cfg = small_config(5);
  cfg.generations = 8;
  cfg.mutation_prob = 0.0; // crossover of near-identical parents repeats genotypes
  const auto res = run_search(cfg, ev, {}, [](std::string_view) {});
  for (const auto& [g, n] : ev.calls_)
    EXPECT_EQ(n, 1) << g;
  EXPECT_EQ(res.evals_used, ev.calls_.size());
  EXPECT_EQ(ev.ids_.size(), ev.calls_.size());
}

TEST(Engine, HvSeriesNonDecreasing)
{
  auto ev = surrogate();
  for (std::uint64_t seed = 0; seed < 5; ++seed)
  {
    auto cfg = small_config(seed);
    cfg.generations = 8;
    const auto res = run_search(cfg, ev, {}, [](std::string_view) {});
    for (std::size_t g = 1; g < res.records.size(); ++g)
    {
      EXPECT_GE(res.records[g].hv, res.records[g - 1].hv);
      EXPECT_GE(res.records[g].normalized_hv, res.records[g - 1].normalized_hv);
    }
    for (const auto& r : res.records)
    {
      EXPECT_GE(r.normalized_hv, 0.0);
      EXPECT_LE(r.normalized_hv, 1.0);
    }
  }
}

TEST(Engine, NadirFromFirstGeneration)
{
  auto ev = surrogate();
  auto cfg = small_config(2);
  SearchState state = initialize_search(cfg);
  const auto rec = run_generation(state, ev, cfg, [](std::string_view) {});
  // all 2n members of R_1 are weakly dominated by the nadir
  for (const auto& [key, r] : state.cache)
  {
    const auto cost = analytic_cost(parse(key), cfg.early_exit.macro);
    EXPECT_LE(r.error, rec.nadir.worst.error);
    EXPECT_LE(cost.params_m, rec.nadir.worst.params);
    EXPECT_LE(cost.flops_m, rec.nadir.worst.flops);
  }
  const auto rec2 = run_generation(state, ev, cfg, [](std::string_view) {});
  EXPECT_EQ(rec2.nadir, rec.nadir);
}

TEST(Engine, ElitismKeepsNonDominatedSurvivors)
{
  auto ev = surrogate();
  auto cfg = small_config(4);
  SearchState state = initialize_search(cfg);
  run_generation(state, ev, cfg, [](std::string_view) {});
  for (int g = 0; g < 4; ++g)
  {
    const auto before = front0_of(state.parents);
    run_generation(state, ev, cfg, [](std::string_view) {});
    if (front0_of(state.parents).size() >= cfg.population)
      continue;
    for (const auto& m : before)
    {
      bool dominated = false, kept = false;
      for (const auto& p : state.parents)
      {
        dominated = dominated || dominates(*p.objectives, *m.objectives);
        kept = kept || p.genotype == m.genotype;
      }
      if (!dominated)
      {
        EXPECT_TRUE(kept) << serialize(m.genotype);
      }
    }
  }
}

TEST(Engine, FirstGenerationRespectsBeta)
{
  auto cfg = small_config(6);
  cfg.early_exit.beta = 2.0;
  const SearchState s = initialize_search(cfg);
  for (const auto* pop : {&s.parents, &s.offspring})
    for (const auto& m : *pop)
      EXPECT_LE(m.cost->params_m, 2.0);
}

TEST(Engine, StrictOffspringFilter)
{
  auto ev = surrogate();
  auto cfg = small_config(6);
  cfg.early_exit.beta = 2.0;
  cfg.strict_offspring_filter = true;
  cfg.mutation_prob = 1.0;
  SearchState state = initialize_search(cfg);
  for (int g = 0; g < 4; ++g)
  {
    run_generation(state, ev, cfg, [](std::string_view) {});
    for (const auto& m : state.offspring)
      EXPECT_LE(m.cost->params_m, 2.0);
  }
}

TEST(Engine, OffspringSplitHalfCrossoverHalfMutation)
{
  auto cfg = small_config(11);
  cfg.mutation_prob = 0.0;
  auto ev = surrogate();
  SearchState state = initialize_search(cfg);
  run_generation(state, ev, cfg, [](std::string_view) {});
  // with no mutation the second half copies tournament winners verbatim
  for (std::size_t i = cfg.population / 2; i < cfg.population; ++i)
    EXPECT_TRUE(std::any_of(state.parents.begin(), state.parents.end(), [&](const Individual& p) {
      return p.genotype == state.offspring[i].genotype;
    }));
}

TEST(Engine, AbortPolicyRethrows)
{
  ExternalEvaluator ev(std::string(EENAS_STUB_EVALUATOR) + " range", 5000ms);
  EXPECT_THROW(run_search(small_config(1), ev, {}, [](std::string_view) {}), EvaluatorError);
}

TEST(Engine, WorstCasePolicyAssignsErrorOneAndLogs)
{
  ExternalEvaluator ev(std::string(EENAS_STUB_EVALUATOR) + " flaky", 5000ms, 2);
  auto cfg = small_config(1);
  cfg.failure_policy = FailurePolicy::worst_case;
  cfg.workers = 2;
  std::vector<std::string> messages;
  std::mutex mu;
  const Logger log = [&](std::string_view m) {
    std::lock_guard lock(mu);
    messages.emplace_back(m);
  };
  SearchState state = initialize_search(cfg);
  for (int g = 0; g < 3; ++g)
    run_generation(state, ev, cfg, log);
  std::size_t worst = 0;
  for (const auto& [key, r] : state.cache)
    worst += r.error == 1.0;
  EXPECT_GT(worst, 0u);
  EXPECT_EQ(messages.size(), worst);
  for (const auto& m : state.parents)
    EXPECT_TRUE(m.objectives->is_valid());
}

TEST(Engine, Nb201SearchWithTournamentTen)
{
  auto ev = surrogate(Space::nb201);
  EngineConfig cfg;
  cfg.space = Space::nb201;
  cfg.population = 30;
  cfg.generations = 4;
  cfg.tournament_size = 10;
  cfg.early_exit.macro = MacroConfig::defaults(Space::nb201);
  const auto res = run_search(cfg, ev, {}, [](std::string_view) {});
  for (const auto& m : res.population)
    EXPECT_TRUE(std::holds_alternative<Nb201Genotype>(m.genotype));
}

TEST(Engine, InvalidConfigRejected)
{
  auto ev = surrogate();
  auto cfg = small_config(0);
  cfg.weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(run_search(cfg, ev), ConfigError);
  cfg = small_config(0);
  cfg.tournament_size = 0;
  EXPECT_THROW(run_search(cfg, ev), ConfigError);
}

TEST(RunLog, RoundTripIsExact)
{
  auto ev = surrogate();
  const auto res = run_search(small_config(9), ev, {}, [](std::string_view) {});
  std::ostringstream os;
  for (const auto& r : res.records)
    write_record(os, r);
  std::vector<GenerationRecord> back;
  std::istringstream is(os.str());
  std::string line;
  while (std::getline(is, line))
    back.push_back(record_from_json(nlohmann::json::parse(line)));
  ASSERT_EQ(back.size(), res.records.size());
  const auto series = normalized_hv_series(back);
  for (std::size_t g = 0; g < back.size(); ++g)
  {
    EXPECT_EQ(series[g].hv, res.records[g].hv);
    EXPECT_EQ(series[g].normalized_hv, res.records[g].normalized_hv);
    EXPECT_EQ(back[g].front0, res.records[g].front0);
  }
}
