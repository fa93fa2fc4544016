#pragma once

#include "eenas/cost_model.hpp"
#include "eenas/evolution.hpp"
#include "eenas/rng.hpp"
#include "eenas/search_space.hpp"

#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace eenas {

/// Early-exit filter settings. beta is a parameter budget in millions;
/// beta == 0 disables the filter.
struct EarlyExitConfig
{
  double beta = 0.0;
  int max_attempts_per_slot = 10000;
  MacroConfig macro{};

  void validate() const
  {
    if (!(beta >= 0.0))
      throw ConfigError("beta must be >= 0");
    if (max_attempts_per_slot < 1)
      throw ConfigError("max_attempts_per_slot must be >= 1");
    macro.validate();
  }
};

/// 1 if a model with alpha million parameters fits the budget beta, else 0.
/// beta == 0 accepts everything.
inline int early_exit(double alpha, double beta)
{
  if (beta == 0.0)
    return 1;
  return alpha <= beta ? 1 : 0;
}

/// No genotype within the attempt limit fit the budget.
class BudgetInfeasible : public std::runtime_error
{
public:
  BudgetInfeasible(double beta, int attempts, double min_params_seen)
    : std::runtime_error(message(beta, attempts, min_params_seen))
    , beta_(beta)
    , attempts_(attempts)
    , min_params_seen_(min_params_seen)
  {
  }

  double beta() const noexcept { return beta_; }
  int attempts() const noexcept { return attempts_; }
  double min_params_seen() const noexcept { return min_params_seen_; }

private:
  static std::string message(double beta, int attempts, double min_seen)
  {
    std::ostringstream os;
    os << "budget infeasible: no genotype with params <= beta=" << beta << "M after " << attempts
       << " attempts (smallest seen: " << min_seen << "M)";
    return os.str();
  }

  double beta_;
  int attempts_;
  double min_params_seen_;
};

/// Draws genotypes from rng until one passes the early-exit test.
/// The returned individual carries its analytic cost.
inline Individual sample_within_budget(Rng& rng, Space space, const EarlyExitConfig& cfg)
{
  double min_seen = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < cfg.max_attempts_per_slot; ++attempt)
  {
    Individual ind;
    ind.genotype = random_genotype(rng, space);
    const CostReport cost = architecture_cost(ind.genotype, cfg.macro);
    min_seen = std::min(min_seen, cost.params_m());
    if (early_exit(cost.params_m(), cfg.beta) == 1)
    {
      ind.cost = AnalyticCost{cost.params_m(), cost.flops_m()};
      return ind;
    }
  }
  throw BudgetInfeasible(cfg.beta, cfg.max_attempts_per_slot, min_seen);
}

/// Early-exit population initialisation: fills n slots by rejection sampling.
/// Slot i draws from its own stream derive_seed(seed, {stream, i}), so the
/// result depends only on (seed, stream, n) and not on fill order.
inline std::vector<Individual> initialize_population(std::size_t n, const EarlyExitConfig& cfg,
                                                     Space space, std::uint64_t seed,
                                                     std::uint64_t stream = 0)
{
  if (n < 1)
    throw ContractViolation("initialize_population needs n >= 1");
  cfg.validate();
  std::vector<Individual> pop;
  pop.reserve(n);
  for (std::size_t slot = 0; slot < n; ++slot)
  {
    Rng rng(derive_seed(seed, {stream, slot}));
    pop.push_back(sample_within_budget(rng, space, cfg));
  }
  return pop;
}

} // namespace eenas
