#pragma once

#include "eenas/errors.hpp"
#include "eenas/metrics.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace eenas {

namespace detail {

inline nlohmann::ordered_json objectives_json(const ObjectiveVector& o)
{
  return nlohmann::ordered_json::array({o.error, o.flops, o.params});
}

inline ObjectiveVector objectives_from_json(const nlohmann::json& j)
{
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument("objective vector must be [error, flops_m, params_m]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline std::string number(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

} // namespace detail

/// One run-log line. Objective triples are [error, flops_m, params_m].
inline nlohmann::ordered_json to_json(const GenerationRecord& r)
{
  using detail::objectives_json;
  nlohmann::ordered_json j;
  j["generation"] = r.generation;
  j["front0"] = r.front0;
  j["hv"] = r.hv;
  j["best_error"] = r.best_error;
  j["mean_params"] = r.mean_params;
  j["evals_used"] = r.evals_used;
  j["normalized_hv"] = r.normalized_hv;
  j["cost_units"] = r.cost_units;
  j["population_front0_size"] = r.population_front0_size;
  j["nadir"] = objectives_json(r.nadir.worst);
  auto& fo = j["front0_objectives"] = nlohmann::ordered_json::array();
  for (const auto& o : r.front0_objectives)
    fo.push_back(objectives_json(o));
  auto& pop = j["population"] = nlohmann::ordered_json::array();
  for (const auto& o : r.population)
    pop.push_back(objectives_json(o));
  return j;
}

inline GenerationRecord record_from_json(const nlohmann::json& j)
{
  GenerationRecord r;
  r.generation = j.at("generation").get<int>();
  r.front0 = j.at("front0").get<std::vector<std::string>>();
  r.hv = j.at("hv").get<double>();
  r.best_error = j.at("best_error").get<double>();
  r.mean_params = j.at("mean_params").get<double>();
  r.evals_used = j.at("evals_used").get<std::size_t>();
  r.normalized_hv = j.value("normalized_hv", 0.0);
  r.cost_units = j.value("cost_units", 0.0);
  r.population_front0_size = j.value("population_front0_size", std::size_t{0});
  r.nadir.worst = detail::objectives_from_json(j.at("nadir"));
  for (const auto& o : j.at("front0_objectives"))
    r.front0_objectives.push_back(detail::objectives_from_json(o));
  if (r.front0_objectives.size() != r.front0.size())
    throw std::invalid_argument("front0 and front0_objectives differ in length");
  if (j.contains("population"))
    for (const auto& o : j["population"])
      r.population.push_back(detail::objectives_from_json(o));
  return r;
}

inline void write_record(std::ostream& out, const GenerationRecord& r)
{
  out << to_json(r).dump() << '\n';
}

/// Reads a JSONL run log. A corrupt line raises IoError naming its line number;
/// a log without records is an error too.
inline std::vector<GenerationRecord> read_run_log(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open run log " + path);
  std::vector<GenerationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try
    {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    catch (const std::exception& e)
    {
      throw IoError(path + ":" + std::to_string(lineno) + ": corrupt run-log line: " + e.what());
    }
  }
  if (out.empty())
    throw IoError(path + ": run log is empty");
  return out;
}

inline void write_metrics_csv(std::ostream& out, std::span<const GenerationRecord> records,
                              std::span<const HvPoint> series)
{
  using detail::number;
  out << "generation,hv,normalized_hv,best_error,evals\n";
  for (std::size_t i = 0; i < records.size(); ++i)
    out << records[i].generation << ',' << number(series[i].hv) << ','
        << number(series[i].normalized_hv) << ',' << number(records[i].best_error) << ','
        << records[i].evals_used << '\n';
}

/// One row per surviving individual per generation.
inline void write_scatter_csv(std::ostream& out, std::span<const GenerationRecord> records)
{
  using detail::number;
  out << "generation,error,flops_m,params_m\n";
  for (const auto& r : records)
    for (const auto& o : r.population)
      out << r.generation << ',' << number(o.error) << ',' << number(o.flops) << ','
          << number(o.params) << '\n';
}

} // namespace eenas
