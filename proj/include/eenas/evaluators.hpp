#pragma once

#include "eenas/cost_model.hpp"
#include "eenas/errors.hpp"
#include "eenas/search_space.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace eenas {

struct EvaluationRequest
{
  std::uint64_t id = 0;
  std::string genotype; // serialized
  int epochs = 1;
};

struct EvaluationResult
{
  std::uint64_t id = 0;
  double error = 1.0;
  std::optional<double> flops_m;  // overrides the cost model when present
  std::optional<double> params_m; // overrides the cost model when present
  double cost_units = 0.0;
};

/// Fitness source failure. kind() separates the causes callers act on.
class EvaluatorError : public std::runtime_error
{
public:
  enum class Kind
  {
    not_in_benchmark,
    timeout,
    malformed_response,
    id_mismatch,
    out_of_range,
    process_exit,
    spawn_failed,
    io
  };

  EvaluatorError(Kind kind, const std::string& what, std::string payload = {})
    : std::runtime_error(what + (payload.empty() ? "" : ": " + payload))
    , kind_(kind)
    , payload_(std::move(payload))
  {
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& payload() const noexcept { return payload_; }

private:
  Kind kind_;
  std::string payload_;
};

/// Rejects results that would corrupt the objective space.
inline void check_result(const EvaluationResult& r, const EvaluationRequest& req,
                         const std::string& payload = {})
{
  if (r.id != req.id)
    throw EvaluatorError(EvaluatorError::Kind::id_mismatch,
                         "response id " + std::to_string(r.id) + " does not match request id " +
                           std::to_string(req.id),
                         payload);
  if (!std::isfinite(r.error) || r.error < 0.0 || r.error > 1.0)
    throw EvaluatorError(EvaluatorError::Kind::out_of_range,
                         "error " + std::to_string(r.error) + " outside [0, 1]", payload);
  if (!std::isfinite(r.cost_units) || r.cost_units < 0.0)
    throw EvaluatorError(EvaluatorError::Kind::out_of_range, "negative or non-finite cost_units",
                         payload);
  for (const auto& v : {r.flops_m, r.params_m})
    if (v && (!std::isfinite(*v) || *v < 0.0))
      throw EvaluatorError(EvaluatorError::Kind::out_of_range,
                           "negative or non-finite flops_m/params_m", payload);
}

/// Fitness source. Implementations must tolerate concurrent evaluate() calls.
class Evaluator
{
public:
  virtual ~Evaluator() = default;
  virtual EvaluationResult evaluate(const EvaluationRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Tabular benchmark
// ---------------------------------------------------------------------------

struct BenchmarkEntry
{
  double val_error = 0.0;
  double test_error = 0.0;
  double params_m = 0.0;
  double flops_m = 0.0;
};

/// Precomputed table keyed by canonical genotype text.
///
/// File format: one JSON object per line,
/// {"arch": key, "val_error": f, "test_error": f, "params_m": f, "flops_m": f}.
class TabularBenchmark
{
public:
  void insert(const std::string& arch, const BenchmarkEntry& entry)
  {
    const std::string key = serialize(parse(arch));
    auto [it, fresh] = index_.try_emplace(key, keys_.size());
    if (fresh)
    {
      keys_.push_back(key);
      entries_.push_back(entry);
    }
    else
      entries_[it->second] = entry;
  }

  const BenchmarkEntry* find(const std::string& key) const
  {
    const auto it = index_.find(key);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  std::size_t size() const { return keys_.size(); }

  template <class Fn>
  void for_each(Fn&& fn) const
  {
    for (std::size_t i = 0; i < keys_.size(); ++i)
      fn(keys_[i], entries_[i]);
  }

  static nlohmann::ordered_json to_json_line(const std::string& key, const BenchmarkEntry& e)
  {
    return {{"arch", key},
            {"val_error", e.val_error},
            {"test_error", e.test_error},
            {"params_m", e.params_m},
            {"flops_m", e.flops_m}};
  }

  void save(const std::string& path) const
  {
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw IoError("cannot write benchmark file " + path);
    for (std::size_t i = 0; i < keys_.size(); ++i)
      out << to_json_line(keys_[i], entries_[i]).dump() << '\n';
    if (!out)
      throw IoError("failed writing benchmark file " + path);
  }

  static TabularBenchmark load(const std::string& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open benchmark file " + path);
    TabularBenchmark bench;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
      ++lineno;
      if (line.empty())
        continue;
      try
      {
        const auto j = nlohmann::json::parse(line);
        BenchmarkEntry e;
        e.val_error = j.at("val_error").get<double>();
        e.test_error = j.at("test_error").get<double>();
        e.params_m = j.at("params_m").get<double>();
        e.flops_m = j.at("flops_m").get<double>();
        bench.insert(j.at("arch").get<std::string>(), e);
      }
      catch (const std::exception& ex)
      {
        throw IoError(path + ":" + std::to_string(lineno) + ": corrupt benchmark line: " +
                      ex.what());
      }
    }
    return bench;
  }

private:
  std::vector<std::string> keys_;
  std::vector<BenchmarkEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Exact table lookup; costs nothing to query.
inline EvaluationResult evaluate_tabular(const TabularBenchmark& bench, const Genotype& g,
                                         std::uint64_t id = 0)
{
  const std::string key = serialize(g);
  const BenchmarkEntry* e = bench.find(key);
  if (!e)
    throw EvaluatorError(EvaluatorError::Kind::not_in_benchmark, "architecture not in benchmark",
                         key);
  return {id, e->val_error, e->flops_m, e->params_m, 0.0};
}

class TabularEvaluator final : public Evaluator
{
public:
  explicit TabularEvaluator(TabularBenchmark bench) : bench_(std::move(bench)) {}

  EvaluationResult evaluate(const EvaluationRequest& req) override
  {
    return evaluate_tabular(bench_, parse(req.genotype), req.id);
  }

  const TabularBenchmark& benchmark() const { return bench_; }

private:
  TabularBenchmark bench_;
};

// ---------------------------------------------------------------------------
// Synthetic surrogate
// ---------------------------------------------------------------------------

/// Constants of the deterministic surrogate
///
///   q     = capacity * max(0, P - P_skip) / params_scale
///         + diversity * (distinct_ops - 1) / (op_count - 1)
///         + noise * h(g) * weighted_fraction
///   error = 0.95 - 1.8 * (sigmoid(q) - 0.5)
///
/// P is the analytic parameter count (millions), P_skip that of the all-skip
/// genotype under the same macro, h(g) in [0, 1) a salted FNV-1a hash of the
/// canonical genotype text and weighted_fraction the share of edges holding a
/// weight-bearing op. Every term is >= 0, so q >= 0 and error lies in
/// (0.05, 0.95]; the all-skip genotype has q = 0 and scores exactly 0.95.
struct SurrogateParams
{
  double capacity = 1.0;
  double params_scale_m = 1.0;
  double diversity = 0.5;
  double noise = 0.75;
  std::uint64_t salt = 0;

  static SurrogateParams for_space(Space space, std::uint64_t salt = 0)
  {
    SurrogateParams p;
    p.salt = salt;
    if (space == Space::nb201)
      p.params_scale_m = 0.3;
    return p;
  }
};

inline constexpr double kSurrogateMinError = 0.05;
inline constexpr double kSurrogateMaxError = 0.95;

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t salt, std::string_view text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i)
    eat(static_cast<unsigned char>(salt >> (8 * i)));
  for (const char c : text)
    eat(static_cast<unsigned char>(c));
  return h;
}

struct OpStats
{
  int distinct = 0;
  int op_count = 0;
  double weighted_fraction = 0.0;
};

inline OpStats op_stats(const Genotype& g)
{
  OpStats s;
  std::vector<int> ids;
  int weighted = 0;
  if (const auto* c = std::get_if<CellGenotype>(&g))
  {
    for (const Cell* cell : {&c->normal, &c->reduction})
      for (const Gene& gene : *cell)
      {
        ids.push_back(gene.op);
        weighted += gene.op >= static_cast<int>(Operation::sep_conv_3x3) &&
                    gene.op <= static_cast<int>(Operation::inv_res_5x5);
      }
    s.op_count = kNumOperations;
  }
  else
  {
    for (const int op : std::get<Nb201Genotype>(g).ops)
    {
      ids.push_back(op);
      weighted += op == static_cast<int>(Nb201Op::nor_conv_1x1) ||
                  op == static_cast<int>(Nb201Op::nor_conv_3x3);
    }
    s.op_count = kNumNb201Ops;
  }
  std::sort(ids.begin(), ids.end());
  s.distinct = static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin());
  s.weighted_fraction = static_cast<double>(weighted) / static_cast<double>(ids.size());
  return s;
}

} // namespace detail

/// Hash term h(g) of the surrogate, uniform-ish in [0, 1).
inline double surrogate_noise(const Genotype& g, std::uint64_t salt)
{
  return static_cast<double>(detail::fnv1a(salt, serialize(g)) >> 11) * 0x1.0p-53;
}

/// Deterministic stand-in for training. cost_units equals the analytic
/// parameter count in millions (simulated training cost).
inline EvaluationResult evaluate_surrogate(const Genotype& g, const MacroConfig& macro,
                                           const SurrogateParams& p, std::uint64_t id = 0)
{
  const double params = architecture_cost(g, macro).params_m();
  const double floor = architecture_cost(all_skip_genotype(space_of(g)), macro).params_m();
  const auto stats = detail::op_stats(g);
  const double q = p.capacity * std::max(0.0, params - floor) / p.params_scale_m +
                   p.diversity * (stats.distinct - 1) / (stats.op_count - 1) +
                   p.noise * surrogate_noise(g, p.salt) * stats.weighted_fraction;
  const double sigmoid = 1.0 / (1.0 + std::exp(-q));
  EvaluationResult r;
  r.id = id;
  // sigmoid(0) == 0.5 exactly, so q == 0 lands on the maximum without rounding
  r.error = kSurrogateMaxError - 2.0 * (kSurrogateMaxError - kSurrogateMinError) * (sigmoid - 0.5);
  r.cost_units = params;
  return r;
}

class SurrogateEvaluator final : public Evaluator
{
public:
  SurrogateEvaluator(MacroConfig macro, SurrogateParams params)
    : macro_(macro)
    , params_(params)
  {
  }

  EvaluationResult evaluate(const EvaluationRequest& req) override
  {
    return evaluate_surrogate(parse(req.genotype), macro_, params_, req.id);
  }

private:
  MacroConfig macro_;
  SurrogateParams params_;
};

} // namespace eenas
