#pragma once

#include "eenas/config.hpp"
#include "eenas/engine.hpp"
#include "eenas/evaluators.hpp"
#include "eenas/external_evaluator.hpp"
#include "eenas/run_log.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace eenas {

namespace fs = std::filesystem;

enum ExitCode : int
{
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitInfeasible = 3,
  kExitEvaluator = 4,
  kExitIo = 5,
};

/// Maps an exception escaping a command to the process exit code.
inline int exit_code_for(std::exception_ptr e)
{
  try
  {
    std::rethrow_exception(e);
  }
  catch (const ConfigError&)
  {
    return kExitConfig;
  }
  catch (const ParseError&)
  {
    return kExitConfig;
  }
  catch (const EncodingError&)
  {
    return kExitConfig;
  }
  catch (const BudgetInfeasible&)
  {
    return kExitInfeasible;
  }
  catch (const EvaluatorError&)
  {
    return kExitEvaluator;
  }
  catch (const IoError&)
  {
    return kExitIo;
  }
  catch (...)
  {
    return kExitInternal;
  }
}

inline std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& c)
{
  switch (c.evaluator)
  {
  case EvaluatorKind::tabular:
    return std::make_unique<TabularEvaluator>(TabularBenchmark::load(c.tabular_path));
  case EvaluatorKind::external:
    return std::make_unique<ExternalEvaluator>(
      c.external_command, std::chrono::milliseconds(c.timeout_ms), c.workers);
  default:
    return std::make_unique<SurrogateEvaluator>(
      c.macro, SurrogateParams::for_space(c.space, c.surrogate_salt));
  }
}

namespace detail {

inline std::ofstream open_output(const fs::path& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  return out;
}

inline void close_output(std::ofstream& out, const fs::path& path)
{
  out.close();
  if (!out)
    throw IoError("failed writing " + path.string());
}

inline void write_text(const fs::path& path, const std::string& text)
{
  auto out = open_output(path);
  out << text;
  close_output(out, path);
}

inline nlohmann::ordered_json individual_json(const Individual& m)
{
  nlohmann::ordered_json j;
  j["genotype"] = serialize(m.genotype);
  j["error"] = m.objectives->error;
  j["flops_m"] = m.objectives->flops;
  j["params_m"] = m.objectives->params;
  j["rank"] = m.rank;
  return j;
}

inline void make_directory(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

} // namespace detail

struct RunOutput
{
  fs::path dir;
  SearchResult result;
  std::vector<Individual> selected;
};

/// One search run writing config.ini, run_log.jsonl, metrics.csv,
/// scatter.csv, pareto.json and selected.json into dir.
inline RunOutput run_to_directory(const SearchConfig& config, const fs::path& dir,
                                  Evaluator& evaluator, const Logger& log = stderr_logger())
{
  detail::make_directory(dir);
  SearchConfig snapshot = config;
  snapshot.output_dir = dir.string();
  snapshot.repeats = 1;
  detail::write_text(dir / "config.ini", to_ini(snapshot));

  const fs::path log_path = dir / "run_log.jsonl";
  auto run_log = detail::open_output(log_path);
  RunOutput out;
  out.dir = dir;
  out.result = run_search(
    config.engine(), evaluator,
    [&](const GenerationRecord& r) {
      write_record(run_log, r);
      run_log.flush();
      if (!run_log)
        throw IoError("failed writing " + log_path.string());
      log("generation " + std::to_string(r.generation) + ": hv=" + detail::number(r.hv) +
          " normalized_hv=" + detail::number(r.normalized_hv) +
          " best_error=" + detail::number(r.best_error) + " evals=" + std::to_string(r.evals_used));
    },
    log);
  detail::close_output(run_log, log_path);

  const auto series = normalized_hv_series(out.result.records);
  {
    auto csv = detail::open_output(dir / "metrics.csv");
    write_metrics_csv(csv, out.result.records, series);
    detail::close_output(csv, dir / "metrics.csv");
  }
  {
    auto csv = detail::open_output(dir / "scatter.csv");
    write_scatter_csv(csv, out.result.records);
    detail::close_output(csv, dir / "scatter.csv");
  }

  nlohmann::ordered_json pareto;
  pareto["seed"] = config.seed;
  pareto["generations"] = config.generations;
  pareto["front"] = nlohmann::ordered_json::array();
  for (const auto& m : out.result.front0)
    pareto["front"].push_back(detail::individual_json(m));
  detail::write_text(dir / "pareto.json", pareto.dump(2) + "\n");

  out.selected = select_k_pareto(out.result.front0, config.k_final, config.weights);
  nlohmann::ordered_json selected;
  selected["k"] = config.k_final;
  selected["selected"] = nlohmann::ordered_json::array();
  for (const auto& m : out.selected)
    selected["selected"].push_back(detail::individual_json(m));
  detail::write_text(dir / "selected.json", selected.dump(2) + "\n");
  return out;
}

struct MeanStd
{
  double mean = 0.0;
  double std = 0.0; // sample standard deviation, 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& xs)
{
  MeanStd r;
  if (xs.empty())
    return r;
  for (const double x : xs)
    r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1)
  {
    double ss = 0.0;
    for (const double x : xs)
      ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

/// Runs the configured search. With repeats > 1 each repeat r uses seed + r
/// and writes into output_dir/rep_<r>; summary.json holds mean and std of the
/// final statistics.
inline std::vector<RunOutput> cmd_search(const SearchConfig& config,
                                         const Logger& log = stderr_logger())
{
  config.validate();
  auto evaluator = make_evaluator(config);
  std::vector<RunOutput> runs;
  if (config.repeats == 1)
  {
    runs.push_back(run_to_directory(config, config.output_dir, *evaluator, log));
    return runs;
  }
  std::vector<double> hv, nhv, best, cost;
  for (int r = 0; r < config.repeats; ++r)
  {
    SearchConfig rep = config;
    rep.seed = config.seed + static_cast<std::uint64_t>(r);
    log("repeat " + std::to_string(r) + " (seed " + std::to_string(rep.seed) + ")");
    runs.push_back(run_to_directory(rep, fs::path(config.output_dir) / ("rep_" + std::to_string(r)),
                                    *evaluator, log));
    const auto& last = runs.back().result.records.back();
    hv.push_back(last.hv);
    nhv.push_back(last.normalized_hv);
    best.push_back(last.best_error);
    cost.push_back(runs.back().result.cost_used);
  }
  nlohmann::ordered_json summary;
  summary["repeats"] = config.repeats;
  summary["runs"] = nlohmann::ordered_json::array();
  for (int r = 0; r < config.repeats; ++r)
    summary["runs"].push_back({{"dir", runs[r].dir.filename().string()},
                               {"seed", config.seed + static_cast<std::uint64_t>(r)}});
  for (const auto& [name, xs] : {std::pair{"final_hv", &hv}, std::pair{"final_normalized_hv", &nhv},
                                 std::pair{"final_best_error", &best},
                                 std::pair{"total_cost_units", &cost}})
  {
    const MeanStd s = mean_std(*xs);
    summary[name] = {{"mean", s.mean}, {"std", s.std}};
  }
  detail::write_text(fs::path(config.output_dir) / "summary.json", summary.dump(2) + "\n");
  return runs;
}

struct DecodeOutput
{
  std::string dot;
  nlohmann::json cost;
};

/// Graph and cost of one genotype. macro defaults to the genotype's space.
inline DecodeOutput cmd_decode(const std::string& text, std::optional<MacroConfig> macro = {})
{
  const Genotype g = parse(text);
  const MacroConfig m = macro.value_or(MacroConfig::defaults(space_of(g)));
  DecodeOutput out;
  out.dot = to_dot(decode(g));
  out.cost = to_json(architecture_cost(g, m));
  return out;
}

/// Recomputes the HV series of a run log and writes metrics.csv and
/// scatter.csv into out_dir. shared_nadir replaces each record's own nadir.
inline std::vector<HvPoint> cmd_hv(const fs::path& log_path, const fs::path& out_dir,
                                   std::optional<ReferencePoint> shared_nadir = {})
{
  const auto records = read_run_log(log_path.string());
  const auto series = normalized_hv_series(records, shared_nadir);
  detail::make_directory(out_dir);
  {
    auto csv = detail::open_output(out_dir / "metrics.csv");
    write_metrics_csv(csv, records, series);
    detail::close_output(csv, out_dir / "metrics.csv");
  }
  {
    auto csv = detail::open_output(out_dir / "scatter.csv");
    write_scatter_csv(csv, records);
    detail::close_output(csv, out_dir / "scatter.csv");
  }
  return series;
}

/// Componentwise maximum of the nadirs stored in several run logs, for
/// comparing runs on one scale.
inline ReferencePoint shared_nadir_of(const std::vector<fs::path>& logs)
{
  if (logs.empty())
    throw ConfigError("shared nadir needs at least one run log");
  std::optional<ReferencePoint> out;
  for (const auto& path : logs)
  {
    const auto records = read_run_log(path.string());
    const auto& w = records.front().nadir.worst;
    if (!out)
      out = records.front().nadir;
    out->worst.error = std::max(out->worst.error, w.error);
    out->worst.flops = std::max(out->worst.flops, w.flops);
    out->worst.params = std::max(out->worst.params, w.params);
  }
  return *out;
}

/// Synthetic NB201 table: every genotype in rank order, errors from the
/// surrogate (validation salted with seed, test with mix64(seed)), costs from
/// the cost model.
inline TabularBenchmark make_nb201_benchmark(std::uint64_t seed,
                                             const MacroConfig& macro = MacroConfig::defaults(
                                               Space::nb201))
{
  const SurrogateParams val = SurrogateParams::for_space(Space::nb201, seed);
  const SurrogateParams test = SurrogateParams::for_space(Space::nb201, mix64(seed));
  TabularBenchmark bench;
  for (std::size_t r = 0; r < kNb201SpaceSize; ++r)
  {
    const Genotype g = nb201_from_rank(r);
    const CostReport cost = architecture_cost(g, macro);
    BenchmarkEntry e;
    e.val_error = evaluate_surrogate(g, macro, val).error;
    e.test_error = evaluate_surrogate(g, macro, test).error;
    e.params_m = cost.params_m();
    e.flops_m = cost.flops_m();
    bench.insert(serialize(g), e);
  }
  return bench;
}

inline std::size_t cmd_benchgen(Space space, const fs::path& output, std::uint64_t seed,
                                const MacroConfig& macro)
{
  if (space != Space::nb201)
    throw ConfigError("benchgen supports only the nb201 space");
  const TabularBenchmark bench = make_nb201_benchmark(seed, macro);
  if (output.has_parent_path())
    detail::make_directory(output.parent_path());
  bench.save(output.string());
  return bench.size();
}

/// Parses and validates; returns the normalised snapshot.
inline std::string cmd_validate_config(const std::string& path,
                                       const std::vector<std::string>& overrides = {})
{
  return to_ini(load_config(path, overrides));
}

} // namespace eenas
