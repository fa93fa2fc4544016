#pragma once

#include "eenas/cost_model.hpp"
#include "eenas/eepi.hpp"
#include "eenas/evaluators.hpp"
#include "eenas/evolution.hpp"
#include "eenas/metrics.hpp"
#include "eenas/rng.hpp"

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

namespace eenas {

enum class FailurePolicy
{
  abort,      // rethrow the evaluator error
  worst_case, // error = 1, analytic costs, logged
};

struct EngineConfig
{
  Space space = Space::cell_based;
  std::size_t population = 40;
  int generations = 30;
  ObjectiveWeights weights{};
  std::uint64_t seed = 0;
  EarlyExitConfig early_exit{};
  int tournament_size = 2;
  double mutation_prob = 0.1;
  double crossover_keep_prob = 0.5;
  bool strict_offspring_filter = false; // apply the beta filter to offspring too
  int epochs = 1;
  FailurePolicy failure_policy = FailurePolicy::abort;
  std::size_t workers = 1;

  void validate() const
  {
    if (population < 1)
      throw ConfigError("population must be >= 1");
    if (generations < 1)
      throw ConfigError("generations must be >= 1");
    if (tournament_size < 1)
      throw ConfigError("tournament_size must be >= 1");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0))
      throw ConfigError("mutation_prob must be in [0, 1]");
    if (!(crossover_keep_prob >= 0.0 && crossover_keep_prob <= 1.0))
      throw ConfigError("crossover_keep_prob must be in [0, 1]");
    if (epochs < 1)
      throw ConfigError("epochs must be >= 1");
    if (workers < 1)
      throw ConfigError("workers must be >= 1");
    weights.validate();
    early_exit.validate();
  }
};

/// Stream tags for derive_seed().
enum class Stream : std::uint64_t
{
  initial_parents = 1,
  initial_offspring = 2,
  offspring = 3,
};

using Logger = std::function<void(std::string_view)>;

inline Logger stderr_logger()
{
  return [](std::string_view msg) { std::cerr << msg << '\n'; };
}

/// Member of the run-wide non-dominated archive.
struct ArchiveEntry
{
  std::string genotype;
  ObjectiveVector objectives;
};

/// Adds a point unless an archived point dominates it; drops archived points
/// it dominates. Insertion order is kept.
inline void update_archive(std::vector<ArchiveEntry>& archive, const std::string& genotype,
                           const ObjectiveVector& objectives)
{
  for (const auto& a : archive)
    if (dominates(a.objectives, objectives) || a.genotype == genotype)
      return;
  std::erase_if(archive, [&](const ArchiveEntry& a) { return dominates(objectives, a.objectives); });
  archive.push_back({genotype, objectives});
}

/// Search state between generations: P_i, Q_i and the evaluation cache.
struct SearchState
{
  int generation = 1;
  std::vector<Individual> parents;
  std::vector<Individual> offspring;
  std::optional<ReferencePoint> nadir;
  std::unordered_map<std::string, EvaluationResult> cache;
  std::vector<ArchiveEntry> archive; // non-dominated set of everything evaluated
  std::uint64_t next_request_id = 0;
  std::size_t evals_used = 0;
  double cost_used = 0.0;
};

inline AnalyticCost analytic_cost(const Genotype& g, const MacroConfig& macro)
{
  const CostReport r = architecture_cost(g, macro);
  return {r.params_m(), r.flops_m()};
}

/// P_1 and Q_1, both filled by early-exit initialisation.
inline SearchState initialize_search(const EngineConfig& cfg)
{
  cfg.validate();
  SearchState s;
  s.parents = initialize_population(cfg.population, cfg.early_exit, cfg.space, cfg.seed,
                                    static_cast<std::uint64_t>(Stream::initial_parents));
  s.offspring = initialize_population(cfg.population, cfg.early_exit, cfg.space, cfg.seed,
                                      static_cast<std::uint64_t>(Stream::initial_offspring));
  return s;
}

namespace detail {

struct EvalTask
{
  std::string key;
  EvaluationRequest request;
  std::optional<EvaluationResult> result;
  std::exception_ptr failure;
};

inline void run_tasks(std::vector<EvalTask>& tasks, Evaluator& evaluator, std::size_t workers)
{
  auto work = [&](std::atomic<std::size_t>& next) {
    for (std::size_t i = next++; i < tasks.size(); i = next++)
    {
      try
      {
        EvaluationResult r = evaluator.evaluate(tasks[i].request);
        check_result(r, tasks[i].request);
        tasks[i].result = r;
      }
      catch (...)
      {
        tasks[i].failure = std::current_exception();
      }
    }
  };
  std::atomic<std::size_t> next{0};
  const std::size_t n_threads = std::min(workers, tasks.size());
  if (n_threads <= 1)
  {
    work(next);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t)
    pool.emplace_back([&] { work(next); });
}

} // namespace detail

/// Evaluates every member without objectives. Distinct genotypes missing from
/// the cache are dispatched in first-appearance order, so request ids and the
/// cache contents do not depend on the worker count. Returns the cost spent.
inline double evaluate_members(std::vector<Individual>& members, SearchState& state,
                               Evaluator& evaluator, const EngineConfig& cfg,
                               const Logger& log = stderr_logger())
{
  std::vector<std::string> keys(members.size());
  std::vector<detail::EvalTask> tasks;
  std::unordered_map<std::string, std::size_t> pending;
  for (std::size_t i = 0; i < members.size(); ++i)
  {
    if (members[i].objectives)
      continue;
    keys[i] = serialize(members[i].genotype);
    if (state.cache.contains(keys[i]) || pending.contains(keys[i]))
      continue;
    pending.emplace(keys[i], i);
    tasks.push_back(
      {keys[i], EvaluationRequest{state.next_request_id++, keys[i], cfg.epochs}, {}, {}});
  }
  detail::run_tasks(tasks, evaluator, cfg.workers);

  double cost = 0.0;
  for (auto& t : tasks)
  {
    if (t.failure)
    {
      if (cfg.failure_policy == FailurePolicy::abort)
        std::rethrow_exception(t.failure);
      std::string why = "unknown failure";
      try
      {
        std::rethrow_exception(t.failure);
      }
      catch (const std::exception& e)
      {
        why = e.what();
      }
      catch (...)
      {
      }
      log("evaluation of " + t.key + " failed (" + why + "); assigning worst-case objectives");
      t.result = EvaluationResult{t.request.id, 1.0, std::nullopt, std::nullopt, 0.0};
    }
    cost += t.result->cost_units;
    state.cache.emplace(t.key, *t.result);
  }
  state.evals_used += tasks.size();
  state.cost_used += cost;

  for (std::size_t i = 0; i < members.size(); ++i)
  {
    auto& m = members[i];
    if (m.objectives)
      continue;
    if (!m.cost)
      m.cost = analytic_cost(m.genotype, cfg.early_exit.macro);
    const EvaluationResult& r = state.cache.at(keys[i]);
    m.objectives = ObjectiveVector{r.error, r.flops_m.value_or(m.cost->flops_m),
                                   r.params_m.value_or(m.cost->params_m)};
  }
  // archive in dispatch order
  for (const auto& t : tasks)
    update_archive(state.archive, t.key, *members[pending.at(t.key)].objectives);
  return cost;
}

/// Q_{i+1}: the first half crossover children of two tournament winners, the
/// second half mutants of one winner. Slot s draws from its own stream
/// derived from (seed, generation, s).
inline std::vector<Individual> make_offspring(const std::vector<Individual>& parents,
                                              int generation, const EngineConfig& cfg)
{
  const std::size_t n = cfg.population;
  const std::size_t n_crossover = n / 2;
  std::vector<Individual> out;
  out.reserve(n);
  for (std::size_t slot = 0; slot < n; ++slot)
  {
    Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::offspring),
                                   static_cast<std::uint64_t>(generation), slot}));
    const bool filtered = cfg.strict_offspring_filter && cfg.early_exit.beta > 0.0;
    const int attempts = filtered ? cfg.early_exit.max_attempts_per_slot : 1;
    double min_seen = std::numeric_limits<double>::infinity();
    bool placed = false;
    for (int a = 0; a < attempts && !placed; ++a)
    {
      Individual child;
      if (slot < n_crossover)
      {
        const auto& p1 = parents[tournament_select(parents, rng, cfg.tournament_size)];
        const auto& p2 = parents[tournament_select(parents, rng, cfg.tournament_size)];
        child.genotype = crossover(p1.genotype, p2.genotype, rng, cfg.crossover_keep_prob);
      }
      else
      {
        const auto& p = parents[tournament_select(parents, rng, cfg.tournament_size)];
        child.genotype = mutate(p.genotype, rng, cfg.mutation_prob);
      }
      child.cost = analytic_cost(child.genotype, cfg.early_exit.macro);
      min_seen = std::min(min_seen, child.cost->params_m);
      if (!filtered || early_exit(child.cost->params_m, cfg.early_exit.beta) == 1)
      {
        out.push_back(std::move(child));
        placed = true;
      }
    }
    if (!placed)
      throw BudgetInfeasible(cfg.early_exit.beta, attempts, min_seen);
  }
  return out;
}

inline std::vector<Individual> front0_of(const std::vector<Individual>& pop)
{
  std::vector<Individual> out;
  for (const auto& m : pop)
    if (m.rank == 0)
      out.push_back(m);
  return out;
}

/// One iteration of the generational loop: R = P u Q, evaluate, sort, keep n
/// survivors, breed the next offspring (unless this was the last generation).
inline GenerationRecord run_generation(SearchState& state, Evaluator& evaluator,
                                       const EngineConfig& cfg,
                                       const Logger& log = stderr_logger())
{
  std::vector<Individual> pool;
  pool.reserve(state.parents.size() + state.offspring.size());
  for (auto& m : state.parents)
    pool.push_back(std::move(m));
  for (auto& m : state.offspring)
    pool.push_back(std::move(m));
  state.parents.clear();
  state.offspring.clear();

  GenerationRecord rec;
  rec.generation = state.generation;
  rec.cost_units = evaluate_members(pool, state, evaluator, cfg, log);

  if (!state.nadir)
  {
    std::vector<ObjectiveVector> first;
    for (const auto& m : pool)
      first.push_back(*m.objectives);
    state.nadir = nadir_from_first_generation(first);
  }

  state.parents = select_survivors(std::move(pool), cfg.population, cfg.weights);

  double params_sum = 0.0;
  rec.best_error = 1.0;
  for (const auto& m : state.parents)
  {
    rec.population.push_back(*m.objectives);
    params_sum += m.objectives->params;
    rec.best_error = std::min(rec.best_error, m.objectives->error);
    rec.population_front0_size += m.rank == 0;
  }
  // front 0 of every solution obtained so far; equals the survivors' front 0
  // whenever that front fits within n
  for (const auto& a : state.archive)
  {
    rec.front0.push_back(a.genotype);
    rec.front0_objectives.push_back(a.objectives);
  }
  rec.mean_params = params_sum / static_cast<double>(state.parents.size());
  rec.nadir = *state.nadir;
  rec.hv = hypervolume(rec.front0_objectives, rec.nadir);
  rec.normalized_hv = normalized_hypervolume(rec.front0_objectives, rec.nadir);
  rec.evals_used = state.evals_used;

  if (state.generation < cfg.generations)
    state.offspring = make_offspring(state.parents, state.generation + 1, cfg);
  ++state.generation;
  return rec;
}

struct SearchResult
{
  std::vector<GenerationRecord> records;
  std::vector<Individual> population; // final P
  std::vector<Individual> front0;
  std::size_t evals_used = 0;
  double cost_used = 0.0;
};

/// Early-exit initialisation followed by cfg.generations generations.
/// on_record sees each record as soon as it is produced.
inline SearchResult run_search(const EngineConfig& cfg, Evaluator& evaluator,
                               const std::function<void(const GenerationRecord&)>& on_record = {},
                               const Logger& log = stderr_logger())
{
  SearchState state = initialize_search(cfg);
  SearchResult out;
  for (int g = 1; g <= cfg.generations; ++g)
  {
    out.records.push_back(run_generation(state, evaluator, cfg, log));
    if (on_record)
      on_record(out.records.back());
  }
  out.population = state.parents;
  out.front0 = front0_of(state.parents);
  out.evals_used = state.evals_used;
  out.cost_used = state.cost_used;
  return out;
}

} // namespace eenas
