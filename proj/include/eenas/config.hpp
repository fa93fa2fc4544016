#pragma once

#include "eenas/cost_model.hpp"
#include "eenas/engine.hpp"
#include "eenas/errors.hpp"
#include "eenas/search_space.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace eenas {

enum class EvaluatorKind
{
  surrogate,
  tabular,
  external
};

inline std::string_view to_string(EvaluatorKind k)
{
  switch (k)
  {
  case EvaluatorKind::tabular:
    return "tabular";
  case EvaluatorKind::external:
    return "external";
  default:
    return "surrogate";
  }
}

inline std::string_view to_string(FailurePolicy p)
{
  return p == FailurePolicy::abort ? "abort" : "worst_case";
}

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "EENAS_OUTPUT_DIR";

/// Everything a search run needs. Defaults depend on the search space:
/// cell-based runs 30 generations of 40 on the 8-cell/32-channel network,
/// NB201 runs 10 generations of 100 with tournament size 10.
struct SearchConfig
{
  Space space = Space::cell_based;
  int generations = 30;
  std::size_t population = 40;
  std::uint64_t seed = 0;
  std::size_t k_final = 5;
  std::size_t workers = 1;
  int repeats = 1; // independent runs with seeds seed, seed+1, ...
  std::string output_dir = "runs/default";

  ObjectiveWeights weights{};

  double beta = 0.0;
  // NB201 only: beta = min + f * (max - min) over the enumerated params range
  std::optional<double> beta_fraction;
  int max_attempts_per_slot = 10000;
  bool strict_offspring_filter = false;

  int tournament_size = 2;
  double mutation_prob = 0.1;
  double crossover_keep_prob = 0.5;

  MacroConfig macro{};

  EvaluatorKind evaluator = EvaluatorKind::surrogate;
  std::string tabular_path;
  std::string external_command;
  int timeout_ms = 60000;
  int epochs = 1;
  FailurePolicy failure_policy = FailurePolicy::abort;
  std::uint64_t surrogate_salt = 0;

  static SearchConfig defaults(Space space)
  {
    SearchConfig c;
    c.space = space;
    c.macro = MacroConfig::defaults(space);
    if (space == Space::nb201)
    {
      c.generations = 10;
      c.population = 100;
      c.tournament_size = 10;
      c.mutation_prob = 0.1;
      c.crossover_keep_prob = 0.5;
    }
    if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir)
      c.output_dir = dir;
    return c;
  }

  EngineConfig engine() const
  {
    EngineConfig e;
    e.space = space;
    e.population = population;
    e.generations = generations;
    e.weights = weights;
    e.seed = seed;
    e.early_exit = EarlyExitConfig{resolved_beta(), max_attempts_per_slot, macro};
    e.tournament_size = tournament_size;
    e.mutation_prob = mutation_prob;
    e.crossover_keep_prob = crossover_keep_prob;
    e.strict_offspring_filter = strict_offspring_filter;
    e.epochs = epochs;
    e.failure_policy = failure_policy;
    e.workers = workers;
    return e;
  }

  /// Params range (millions) of the whole NB201 space under this macro.
  std::pair<double, double> nb201_params_range() const
  {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t r = 0; r < kNb201SpaceSize; ++r)
    {
      const double p = architecture_cost(Genotype{nb201_from_rank(r)}, macro).params_m();
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    return {lo, hi};
  }

  double resolved_beta() const
  {
    if (!beta_fraction)
      return beta;
    if (space != Space::nb201)
      throw ConfigError("early_exit.beta_fraction needs search.space = nb201");
    if (!(*beta_fraction > 0.0 && *beta_fraction <= 1.0))
      throw ConfigError("early_exit.beta_fraction must be in (0, 1]");
    if (beta != 0.0)
      throw ConfigError("set either early_exit.beta or early_exit.beta_fraction, not both");
    const auto [lo, hi] = nb201_params_range();
    return lo + *beta_fraction * (hi - lo);
  }

  void validate() const
  {
    engine().validate();
    if (k_final < 1)
      throw ConfigError("k_final must be >= 1");
    if (repeats < 1)
      throw ConfigError("repeats must be >= 1");
    if (output_dir.empty())
      throw ConfigError("output_dir must not be empty");
    if (evaluator == EvaluatorKind::tabular && tabular_path.empty())
      throw ConfigError("evaluator.kind = tabular needs evaluator.path");
    if (evaluator == EvaluatorKind::external && external_command.empty())
      throw ConfigError("evaluator.kind = external needs evaluator.command");
    if (timeout_ms < 1)
      throw ConfigError("evaluator.timeout_ms must be >= 1");
  }
};

namespace detail {

inline std::string format_double(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text)
{
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  return value;
}

/// Accepts decimals and simple fractions such as "1/3".
inline double parse_fraction(const std::string& key, const std::string& text)
{
  if (const auto slash = text.find('/'); slash != std::string::npos)
  {
    const double num = parse_number<double>(key, trim(text.substr(0, slash)));
    const double den = parse_number<double>(key, trim(text.substr(slash + 1)));
    if (den == 0.0)
      throw ConfigError(key + ": zero denominator");
    return num / den;
  }
  return parse_number<double>(key, text);
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
  if (text == "true" || text == "1" || text == "yes")
    return true;
  if (text == "false" || text == "0" || text == "no")
    return false;
  throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

inline void apply_setting(SearchConfig& c, const std::string& key, const std::string& value)
{
  auto as_int = [&] { return parse_number<int>(key, value); };
  auto as_size = [&] { return parse_number<std::size_t>(key, value); };

  if (key == "search.space")
  {
    if (!space_from_string(value))
      throw ConfigError("search.space: unknown space '" + value + "'");
  }
  else if (key == "search.generations")
    c.generations = as_int();
  else if (key == "search.population")
    c.population = as_size();
  else if (key == "search.seed")
    c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "search.k_final")
    c.k_final = as_size();
  else if (key == "search.workers")
    c.workers = as_size();
  else if (key == "search.repeats")
    c.repeats = as_int();
  else if (key == "search.output_dir")
    c.output_dir = value;
  else if (key == "weights.error")
    c.weights.error = parse_fraction(key, value);
  else if (key == "weights.flops")
    c.weights.flops = parse_fraction(key, value);
  else if (key == "weights.params")
    c.weights.params = parse_fraction(key, value);
  else if (key == "early_exit.beta")
    c.beta = parse_number<double>(key, value);
  else if (key == "early_exit.beta_fraction")
    c.beta_fraction = parse_fraction(key, value);
  else if (key == "early_exit.max_attempts_per_slot")
    c.max_attempts_per_slot = as_int();
  else if (key == "early_exit.strict_offspring_filter")
    c.strict_offspring_filter = parse_bool(key, value);
  else if (key == "operators.tournament_size")
    c.tournament_size = as_int();
  else if (key == "operators.mutation_prob")
    c.mutation_prob = parse_fraction(key, value);
  else if (key == "operators.crossover_keep_prob")
    c.crossover_keep_prob = parse_fraction(key, value);
  else if (key == "macro.cells")
    c.macro.total_cells = as_int();
  else if (key == "macro.channels")
    c.macro.init_channels = as_int();
  else if (key == "macro.resolution")
    c.macro.input_resolution = as_int();
  else if (key == "macro.expansion")
    c.macro.inv_res_expansion = as_int();
  else if (key == "macro.num_classes")
    c.macro.num_classes = as_int();
  else if (key == "evaluator.kind")
  {
    if (value == "surrogate")
      c.evaluator = EvaluatorKind::surrogate;
    else if (value == "tabular")
      c.evaluator = EvaluatorKind::tabular;
    else if (value == "external")
      c.evaluator = EvaluatorKind::external;
    else
      throw ConfigError("evaluator.kind: unknown evaluator '" + value + "'");
  }
  else if (key == "evaluator.path")
    c.tabular_path = value;
  else if (key == "evaluator.command")
    c.external_command = value;
  else if (key == "evaluator.timeout_ms")
    c.timeout_ms = as_int();
  else if (key == "evaluator.epochs")
    c.epochs = as_int();
  else if (key == "evaluator.salt")
    c.surrogate_salt = parse_number<std::uint64_t>(key, value);
  else if (key == "evaluator.failure_policy")
  {
    if (value == "abort")
      c.failure_policy = FailurePolicy::abort;
    else if (value == "worst_case")
      c.failure_policy = FailurePolicy::worst_case;
    else
      throw ConfigError("evaluator.failure_policy: expected abort or worst_case, got '" + value +
                        "'");
  }
  else
    throw ConfigError("unknown configuration key '" + key + "'");
}

/// "section.key=value" -> (section.key, value)
inline std::pair<std::string, std::string> split_override(const std::string& text)
{
  const auto eq = text.find('=');
  if (eq == std::string::npos || text.find('.') > eq)
    throw ConfigError("override '" + text + "' is not of the form section.key=value");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

} // namespace detail

/// Parses a key = value config with [sections]. Overrides ("section.key=value")
/// are applied after the file. search.space picks the defaults every other key
/// starts from.
inline SearchConfig parse_config(const std::string& text,
                                 const std::vector<std::string>& overrides = {})
{
  boost::property_tree::ptree tree;
  try
  {
    std::istringstream in(text);
    boost::property_tree::read_ini(in, tree);
  }
  catch (const boost::property_tree::ini_parser_error& e)
  {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " +
                      e.message());
  }

  std::vector<std::pair<std::string, std::string>> settings;
  for (const auto& [section, body] : tree)
  {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body)
      settings.emplace_back(section + "." + key, detail::trim(value.data()));
  }
  for (const auto& o : overrides)
    settings.push_back(detail::split_override(o));

  Space space = Space::cell_based;
  for (const auto& [key, value] : settings)
    if (key == "search.space")
    {
      const auto s = space_from_string(value);
      if (!s)
        throw ConfigError("search.space: unknown space '" + value + "'");
      space = *s;
    }

  SearchConfig c = SearchConfig::defaults(space);
  for (const auto& [key, value] : settings)
    detail::apply_setting(c, key, value);
  c.validate();
  return c;
}

inline SearchConfig load_config(const std::string& path,
                                const std::vector<std::string>& overrides = {})
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

/// Full snapshot of a config; parse_config(to_ini(c)) reproduces c.
inline std::string to_ini(const SearchConfig& c)
{
  using detail::format_double;
  std::ostringstream os;
  os << "[search]\n"
     << "space = " << to_string(c.space) << "\n"
     << "generations = " << c.generations << "\n"
     << "population = " << c.population << "\n"
     << "seed = " << c.seed << "\n"
     << "k_final = " << c.k_final << "\n"
     << "workers = " << c.workers << "\n"
     << "repeats = " << c.repeats << "\n"
     << "output_dir = " << c.output_dir << "\n\n"
     << "[weights]\n"
     << "error = " << format_double(c.weights.error) << "\n"
     << "flops = " << format_double(c.weights.flops) << "\n"
     << "params = " << format_double(c.weights.params) << "\n\n"
     << "[early_exit]\n"
     << "beta = " << format_double(c.beta) << "\n";
  if (c.beta_fraction)
    os << "beta_fraction = " << format_double(*c.beta_fraction) << "\n";
  os << "max_attempts_per_slot = " << c.max_attempts_per_slot << "\n"
     << "strict_offspring_filter = " << (c.strict_offspring_filter ? "true" : "false") << "\n\n"
     << "[operators]\n"
     << "tournament_size = " << c.tournament_size << "\n"
     << "mutation_prob = " << format_double(c.mutation_prob) << "\n"
     << "crossover_keep_prob = " << format_double(c.crossover_keep_prob) << "\n\n"
     << "[macro]\n"
     << "cells = " << c.macro.total_cells << "\n"
     << "channels = " << c.macro.init_channels << "\n"
     << "resolution = " << c.macro.input_resolution << "\n"
     << "expansion = " << c.macro.inv_res_expansion << "\n"
     << "num_classes = " << c.macro.num_classes << "\n\n"
     << "[evaluator]\n"
     << "kind = " << to_string(c.evaluator) << "\n"
     << "path = " << c.tabular_path << "\n"
     << "command = " << c.external_command << "\n"
     << "timeout_ms = " << c.timeout_ms << "\n"
     << "epochs = " << c.epochs << "\n"
     << "failure_policy = " << to_string(c.failure_policy) << "\n"
     << "salt = " << c.surrogate_salt << "\n";
  return os.str();
}

} // namespace eenas
