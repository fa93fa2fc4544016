#include "eenas/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace eenas;

std::optional<ReferencePoint> parse_nadir(const std::string& text)
{
  if (text.empty())
    return std::nullopt;
  std::istringstream in(text);
  std::array<double, 3> v{};
  char comma = 0;
  if (!(in >> v[0] >> comma >> v[1] >> comma >> v[2]) || !(in >> std::ws).eof())
    throw ConfigError("--nadir expects error,flops_m,params_m; got '" + text + "'");
  return ReferencePoint{{v[0], v[1], v[2]}};
}

SearchConfig config_or_defaults(const std::string& path, const std::vector<std::string>& overrides)
{
  if (!path.empty())
    return load_config(path, overrides);
  return parse_config("", overrides);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Multi-objective evolutionary architecture search with early-exit initialisation"};
  app.require_subcommand(1);

  std::vector<std::string> overrides;

  auto* search = app.add_subcommand("search", "run a search and write a run directory");
  std::string search_config;
  std::string search_output;
  std::optional<std::uint64_t> search_seed;
  std::optional<std::size_t> search_workers;
  search->add_option("config", search_config, "configuration file")->required();
  search->add_option("-o,--output", search_output, "run directory (overrides search.output_dir)");
  search->add_option("--seed", search_seed, "master seed");
  search->add_option("-j,--workers", search_workers, "parallel evaluator workers");
  search->add_option("--set", overrides, "override, section.key=value (repeatable)");

  auto* decode_cmd = app.add_subcommand("decode", "print the cell graph (DOT) and cost of a genotype");
  std::string genotype_text;
  std::string decode_config;
  std::string dot_path;
  std::string cost_path;
  decode_cmd->add_option("genotype", genotype_text, "genotype string")->required();
  decode_cmd->add_option("-c,--config", decode_config, "configuration file for the macro");
  decode_cmd->add_option("--dot", dot_path, "write DOT here instead of stdout");
  decode_cmd->add_option("--cost", cost_path, "write cost JSON here instead of stdout");
  decode_cmd->add_option("--set", overrides, "override, section.key=value (repeatable)");

  auto* hv_cmd = app.add_subcommand("hv", "recompute HV series and scatter CSVs from a run log");
  std::string log_path;
  std::string hv_out;
  std::string nadir_text;
  std::vector<std::string> nadir_logs;
  hv_cmd->add_option("run_log", log_path, "run_log.jsonl")->required();
  hv_cmd->add_option("-o,--output", hv_out, "output directory (default: the log's directory)");
  auto* nadir_opt =
    hv_cmd->add_option("--nadir", nadir_text, "shared reference point error,flops_m,params_m");
  hv_cmd->add_option("--shared-nadir", nadir_logs, "use the worst nadir over these run logs")
    ->excludes(nadir_opt);

  auto* bench_cmd = app.add_subcommand("benchgen", "write a synthetic tabular benchmark");
  std::string bench_space = "nb201";
  std::string bench_out;
  std::uint64_t bench_seed = 0;
  std::string bench_config;
  bench_cmd->add_option("--space", bench_space, "search space (nb201)");
  bench_cmd->add_option("-o,--output", bench_out, "benchmark JSONL path")->required();
  bench_cmd->add_option("--seed", bench_seed, "surrogate salt");
  bench_cmd->add_option("-c,--config", bench_config, "configuration file for the macro");

  auto* validate_cmd = app.add_subcommand("validate-config", "check a configuration file");
  std::string validate_path;
  validate_cmd->add_option("config", validate_path, "configuration file")->required();
  validate_cmd->add_option("--set", overrides, "override, section.key=value (repeatable)");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try
  {
    if (*search)
    {
      if (!search_output.empty())
        overrides.push_back("search.output_dir=" + search_output);
      if (search_seed)
        overrides.push_back("search.seed=" + std::to_string(*search_seed));
      if (search_workers)
        overrides.push_back("search.workers=" + std::to_string(*search_workers));
      const SearchConfig config = load_config(search_config, overrides);
      const auto runs = cmd_search(config);
      for (const auto& run : runs)
        std::cout << run.dir.string() << '\n';
    }
    else if (*decode_cmd)
    {
      std::optional<MacroConfig> macro;
      if (!decode_config.empty() || !overrides.empty())
      {
        const SearchConfig config = config_or_defaults(decode_config, overrides);
        if (space_of(parse(genotype_text)) != config.space)
          throw ConfigError("genotype space does not match search.space of the configuration");
        macro = config.macro;
      }
      const DecodeOutput out = cmd_decode(genotype_text, macro);
      const std::string cost = out.cost.dump(2) + "\n";
      if (dot_path.empty())
        std::cout << out.dot;
      else
        detail::write_text(dot_path, out.dot);
      if (cost_path.empty())
        std::cout << cost;
      else
        detail::write_text(cost_path, cost);
    }
    else if (*hv_cmd)
    {
      std::optional<ReferencePoint> nadir = parse_nadir(nadir_text);
      if (!nadir_logs.empty())
      {
        std::vector<fs::path> logs(nadir_logs.begin(), nadir_logs.end());
        nadir = shared_nadir_of(logs);
      }
      const fs::path out_dir =
        hv_out.empty() ? fs::path(log_path).parent_path() : fs::path(hv_out);
      const auto series = cmd_hv(log_path, out_dir.empty() ? fs::path(".") : out_dir, nadir);
      std::cout << series.size() << " generations\n";
    }
    else if (*bench_cmd)
    {
      const auto space = space_from_string(bench_space);
      if (!space)
        throw ConfigError("unknown space '" + bench_space + "'");
      MacroConfig macro = MacroConfig::defaults(*space);
      if (!bench_config.empty())
      {
        const SearchConfig config = load_config(bench_config);
        if (config.space != *space)
          throw ConfigError("configuration space does not match --space");
        macro = config.macro;
      }
      const std::size_t n = cmd_benchgen(*space, bench_out, bench_seed, macro);
      std::cout << n << " entries written to " << bench_out << '\n';
    }
    else if (*validate_cmd)
    {
      std::cout << cmd_validate_config(validate_path, overrides);
    }
  }
  catch (const std::exception& e)
  {
    std::cerr << "eenas: " << e.what() << '\n';
    return exit_code_for(std::current_exception());
  }
  return kExitOk;
}
