#pragma once

#include "eenas/errors.hpp"
#include "eenas/rng.hpp"
#include "eenas/search_space.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eenas {

inline constexpr std::size_t kNumObjectives = 3;

/// Minimised objectives: error fraction, MACs in millions, parameters in millions.
struct ObjectiveVector
{
  double error = 0.0;
  double flops = 0.0;
  double params = 0.0;

  std::array<double, kNumObjectives> values() const { return {error, flops, params}; }

  double operator[](std::size_t m) const { return m == 0 ? error : m == 1 ? flops : params; }

  bool is_valid() const
  {
    return std::isfinite(error) && std::isfinite(flops) && std::isfinite(params) &&
           error >= 0.0 && error <= 1.0 && flops >= 0.0 && params >= 0.0;
  }

  friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

struct ObjectiveWeights
{
  double error = 1.0 / 3.0;
  double flops = 1.0 / 3.0;
  double params = 1.0 / 3.0;

  std::array<double, kNumObjectives> values() const { return {error, flops, params}; }

  void validate() const
  {
    for (const double w : values())
      if (!(w >= 0.0) || !std::isfinite(w))
        throw ConfigError("objective weights must be finite and non-negative");
    if (std::abs(error + flops + params - 1.0) > 1e-9)
      throw ConfigError("objective weights must sum to 1, got " +
                        std::to_string(error + flops + params));
  }
};

/// Analytic cost attached to an individual before (or instead of) evaluation.
struct AnalyticCost
{
  double params_m = 0.0;
  double flops_m = 0.0;
};

struct Individual
{
  Genotype genotype;
  std::optional<ObjectiveVector> objectives;
  std::optional<AnalyticCost> cost;
  int rank = -1;
  double crowding = 0.0;
};

inline constexpr double kInfiniteCrowding = std::numeric_limits<double>::infinity();

/// Raised when an operation's precondition on its input is violated.
class ContractViolation : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Dominance and sorting
// ---------------------------------------------------------------------------

/// Pareto dominance for minimisation over any indexable point type.
template <class Point>
bool dominates(const Point& a, const Point& b)
{
  bool strictly_better = false;
  for (std::size_t m = 0; m < std::size(a); ++m)
  {
    if (a[m] > b[m])
      return false;
    if (a[m] < b[m])
      strictly_better = true;
  }
  return strictly_better;
}

inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b)
{
  return dominates(a.values(), b.values());
}

using Fronts = std::vector<std::vector<std::size_t>>;

/// Fast non-dominated sort over a list of points. Members of each front are
/// listed in increasing input index.
template <class Point>
Fronts non_dominated_fronts(std::span<const Point> points)
{
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> dominated_by_me(n);
  std::vector<std::size_t> domination_count(n, 0);
  Fronts fronts;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = i + 1; j < n; ++j)
    {
      if (dominates(points[i], points[j]))
      {
        dominated_by_me[i].push_back(j);
        ++domination_count[j];
      }
      else if (dominates(points[j], points[i]))
      {
        dominated_by_me[j].push_back(i);
        ++domination_count[i];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (domination_count[i] == 0)
      current.push_back(i);
  while (!current.empty())
  {
    std::vector<std::size_t> next;
    for (const std::size_t i : current)
      for (const std::size_t j : dominated_by_me[i])
        if (--domination_count[j] == 0)
          next.push_back(j);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

namespace detail {

inline std::vector<ObjectiveVector> objectives_of(std::span<const Individual> pop)
{
  std::vector<ObjectiveVector> out;
  out.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i)
  {
    if (!pop[i].objectives)
      throw ContractViolation("member " + std::to_string(i) + " has not been evaluated");
    out.push_back(*pop[i].objectives);
  }
  return out;
}

} // namespace detail

/// Partitions an evaluated population into Pareto fronts and writes each
/// member's front index into its rank.
inline Fronts non_dominated_sort(std::span<Individual> pop)
{
  const auto objs = detail::objectives_of(pop);
  Fronts fronts = non_dominated_fronts<ObjectiveVector>(objs);
  for (std::size_t f = 0; f < fronts.size(); ++f)
    for (const std::size_t i : fronts[f])
      pop[i].rank = static_cast<int>(f);
  return fronts;
}

// ---------------------------------------------------------------------------
// Crowding distance
// ---------------------------------------------------------------------------

/// Crowding distance with each objective's contribution scaled by its weight.
/// Boundary members of a non-degenerate objective get +inf; an objective with
/// max == min contributes nothing.
inline std::vector<double> crowding_distance(std::span<const ObjectiveVector> front,
                                             const ObjectiveWeights& weights)
{
  const std::size_t n = front.size();
  std::vector<double> distance(n, 0.0);
  if (n <= 2)
  {
    std::fill(distance.begin(), distance.end(), kInfiniteCrowding);
    return distance;
  }
  const auto w = weights.values();
  std::vector<std::size_t> order(n);
  for (std::size_t m = 0; m < kNumObjectives; ++m)
  {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return front[a][m] < front[b][m]; });
    const double lo = front[order.front()][m];
    const double hi = front[order.back()][m];
    const double range = hi - lo;
    if (!(range > 0.0))
      continue;
    distance[order.front()] = kInfiniteCrowding;
    distance[order.back()] = kInfiniteCrowding;
    for (std::size_t k = 1; k + 1 < n; ++k)
    {
      const double gap = front[order[k + 1]][m] - front[order[k - 1]][m];
      distance[order[k]] += w[m] * gap / range;
    }
  }
  return distance;
}

/// Sorts the population, then writes rank and weighted crowding to every member.
inline Fronts assign_rank_and_crowding(std::span<Individual> pop, const ObjectiveWeights& weights)
{
  Fronts fronts = non_dominated_sort(pop);
  for (const auto& front : fronts)
  {
    std::vector<ObjectiveVector> objs;
    objs.reserve(front.size());
    for (const std::size_t i : front)
      objs.push_back(*pop[i].objectives);
    const auto d = crowding_distance(objs, weights);
    for (std::size_t k = 0; k < front.size(); ++k)
      pop[front[k]].crowding = d[k];
  }
  return fronts;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// True when member a beats member b under the crowded-comparison order,
/// falling back to the lower index.
inline bool crowded_better(const Individual& a, std::size_t ia, const Individual& b,
                           std::size_t ib)
{
  if (a.rank != b.rank)
    return a.rank < b.rank;
  if (a.crowding != b.crowding)
    return a.crowding > b.crowding;
  return ia < ib;
}

/// Samples tournament_size members with replacement; returns the winner's index.
inline std::size_t tournament_select(std::span<const Individual> pop, Rng& rng,
                                     int tournament_size)
{
  if (pop.empty())
    throw ContractViolation("tournament_select on an empty population");
  if (tournament_size < 1)
    throw ContractViolation("tournament size must be >= 1");
  std::size_t best = rng.below(pop.size());
  for (int t = 1; t < tournament_size; ++t)
  {
    const std::size_t c = rng.below(pop.size());
    if (crowded_better(pop[c], c, pop[best], best))
      best = c;
  }
  return best;
}

/// Elitist survivor selection: admits whole fronts while they fit and fills
/// the rest from the next front by descending weighted crowding (ties by
/// lower index). The survivors are re-ranked among themselves.
inline std::vector<Individual> select_survivors(std::vector<Individual> pool, std::size_t n,
                                                const ObjectiveWeights& weights)
{
  const Fronts fronts = assign_rank_and_crowding(pool, weights);
  std::vector<Individual> next;
  next.reserve(n);
  for (const auto& front : fronts)
  {
    if (next.size() == n)
      break;
    if (next.size() + front.size() <= n)
    {
      for (const std::size_t i : front)
        next.push_back(pool[i]);
      continue;
    }
    std::vector<std::size_t> order(front.begin(), front.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return pool[a].crowding > pool[b].crowding;
    });
    for (std::size_t k = 0; next.size() < n; ++k)
      next.push_back(pool[order[k]]);
  }
  assign_rank_and_crowding(next, weights);
  return next;
}

/// Picks k members of a front spread evenly along the error axis, both
/// extremes included. k = 1 picks the member with the smallest weighted sum of
/// min-max normalised objectives.
inline std::vector<Individual> select_k_pareto(std::span<const Individual> front, std::size_t k,
                                               const ObjectiveWeights& weights)
{
  if (front.empty())
    throw ContractViolation("select_k_pareto on an empty front");
  if (k < 1)
    throw ContractViolation("select_k_pareto needs k >= 1");
  const auto objs = detail::objectives_of(front);
  std::vector<std::size_t> order(front.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return objs[a].error < objs[b].error; });

  std::vector<Individual> out;
  if (k >= front.size())
  {
    for (const std::size_t i : order)
      out.push_back(front[i]);
    return out;
  }
  if (k == 1)
  {
    std::array<double, kNumObjectives> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto& o : objs)
      for (std::size_t m = 0; m < kNumObjectives; ++m)
      {
        lo[m] = std::min(lo[m], o[m]);
        hi[m] = std::max(hi[m], o[m]);
      }
    const auto w = weights.values();
    std::size_t best = order.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (const std::size_t i : order)
    {
      double score = 0.0;
      for (std::size_t m = 0; m < kNumObjectives; ++m)
        if (hi[m] > lo[m])
          score += w[m] * (objs[i][m] - lo[m]) / (hi[m] - lo[m]);
      if (score < best_score)
      {
        best_score = score;
        best = i;
      }
    }
    out.push_back(front[best]);
    return out;
  }
  const double step = static_cast<double>(front.size() - 1) / static_cast<double>(k - 1);
  for (std::size_t j = 0; j < k; ++j)
    out.push_back(front[order[static_cast<std::size_t>(std::lround(step * static_cast<double>(j)))]]);
  return out;
}

// ---------------------------------------------------------------------------
// Variation
// ---------------------------------------------------------------------------

/// Coin source for crossover: true takes the component from the first parent.
using CoinFn = std::function<bool()>;

/// Uniform crossover of two cells. Each gene's op and index are inherited
/// independently, so a child pair may combine one parent's op with the other
/// parent's index; the result stays valid because both parents' indices at a
/// position come from the same block's allowed set.
inline Cell crossover_cell(const Cell& a, const Cell& b, const CoinFn& coin)
{
  Cell child;
  for (int p = 0; p < kGenesPerCell; ++p)
  {
    child[p].op = coin() ? a[p].op : b[p].op;
    child[p].index = coin() ? a[p].index : b[p].index;
  }
  return child;
}

inline Genotype crossover(const Genotype& a, const Genotype& b, const CoinFn& coin)
{
  if (a.index() != b.index())
    throw ContractViolation("crossover between genotypes of different search spaces");
  if (const auto* ca = std::get_if<CellGenotype>(&a))
  {
    const auto& cb = std::get<CellGenotype>(b);
    CellGenotype child;
    child.normal = crossover_cell(ca->normal, cb.normal, coin);
    child.reduction = crossover_cell(ca->reduction, cb.reduction, coin);
    return child;
  }
  const auto& na = std::get<Nb201Genotype>(a);
  const auto& nb = std::get<Nb201Genotype>(b);
  Nb201Genotype child;
  for (int e = 0; e < kNb201Edges; ++e)
    child.ops[e] = coin() ? na.ops[e] : nb.ops[e];
  return child;
}

/// keep_prob is the chance of taking each component from the first parent.
inline Genotype crossover(const Genotype& a, const Genotype& b, Rng& rng, double keep_prob = 0.5)
{
  return crossover(a, b, [&] { return rng.bernoulli(keep_prob); });
}

/// Replaces the pair at a flat position (0-7 normal, 8-15 reduction; or the
/// NB201 edge) and checks the result.
inline Genotype replace_pair(const Genotype& g, int position, const Gene& pair)
{
  Genotype out = g;
  if (auto* c = std::get_if<CellGenotype>(&out))
  {
    if (position < 0 || position >= 2 * kGenesPerCell)
      throw ContractViolation("gene position " + std::to_string(position) + " out of range");
    Cell& cell = position < kGenesPerCell ? c->normal : c->reduction;
    cell[position % kGenesPerCell] = pair;
  }
  else
  {
    if (position < 0 || position >= kNb201Edges)
      throw ContractViolation("edge " + std::to_string(position) + " out of range");
    std::get<Nb201Genotype>(out).ops[position] = pair.op;
  }
  if (auto v = validate(out); !v.empty())
    throw EncodingError(v.front().to_string());
  return out;
}

/// With probability mutation_prob, replaces one uniformly chosen pair with a
/// freshly sampled valid pair; otherwise returns g unchanged.
inline Genotype mutate(const Genotype& g, Rng& rng, double mutation_prob)
{
  if (!rng.bernoulli(mutation_prob))
    return g;
  const Space space = space_of(g);
  const int position = static_cast<int>(rng.below(static_cast<std::uint64_t>(gene_positions(space))));
  if (space == Space::cell_based)
    return replace_pair(g, position, random_gene(rng, position % kGenesPerCell));
  return replace_pair(g, position, Gene{static_cast<int>(rng.below(kNumNb201Ops)), 0});
}

} // namespace eenas
