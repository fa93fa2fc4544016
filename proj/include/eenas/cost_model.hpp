#pragma once

#include "eenas/errors.hpp"
#include "eenas/search_space.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace eenas {

/// Shape of the network the cells are stacked into.
///
/// Cells are numbered 0..total_cells-1. Channels double and the spatial size
/// halves at the two reduction positions floor(total/3) and floor(2*total/3).
/// For the cell-based space a reduction position holds the reduction cell;
/// for NB201 it holds the fixed residual down-sampling block.
struct MacroConfig
{
  int total_cells = 8;
  int init_channels = 32;
  int input_resolution = 32;
  int inv_res_expansion = 6;
  int num_classes = 10;

  /// Search-time network for each space: 8 cells x 32 channels for the
  /// cell-based space, the 5-cells-per-stage 16-channel network for NB201.
  static MacroConfig defaults(Space space)
  {
    if (space == Space::nb201)
      return MacroConfig{17, 16, 32, 6, 10};
    return MacroConfig{};
  }

  std::array<int, 2> reduction_positions() const
  {
    return {total_cells / 3, 2 * total_cells / 3};
  }

  bool is_reduction(int cell) const
  {
    const auto r = reduction_positions();
    return cell == r[0] || cell == r[1];
  }

  void validate() const
  {
    if (total_cells < 3)
      throw ConfigError("macro: total_cells must be >= 3, got " + std::to_string(total_cells));
    if (init_channels < 1)
      throw ConfigError("macro: init_channels must be >= 1, got " + std::to_string(init_channels));
    if (input_resolution < 8)
      throw ConfigError("macro: input_resolution must be >= 8, got " +
                        std::to_string(input_resolution));
    if (inv_res_expansion < 1)
      throw ConfigError("macro: inv_res_expansion must be >= 1, got " +
                        std::to_string(inv_res_expansion));
    if (num_classes < 1)
      throw ConfigError("macro: num_classes must be >= 1, got " + std::to_string(num_classes));
  }

  friend bool operator==(const MacroConfig&, const MacroConfig&) = default;
};

using Count = std::uint64_t;

// ---------------------------------------------------------------------------
// Per-operation costs
// ---------------------------------------------------------------------------

/// Weights of one op-edge at `channels` channels, batch-norm affine pairs included.
///
///   sep/dil conv k: depthwise C*k^2 + pointwise C^2 + BN 2C
///   inv_res k, t:   expand C*tC + depthwise tC*k^2 + project tC*C + BN 2(C + tC + tC)
constexpr Count op_params(Operation op, Count channels, Count expansion = 6)
{
  const Count c = channels;
  const Count k = static_cast<Count>(kernel_size(op));
  switch (op)
  {
  case Operation::sep_conv_3x3:
  case Operation::sep_conv_5x5:
  case Operation::dil_conv_3x3:
  case Operation::dil_conv_5x5:
    return c * k * k + c * c + 2 * c;
  case Operation::inv_res_3x3:
  case Operation::inv_res_5x5: {
    const Count wide = expansion * c;
    return c * wide + wide * k * k + wide * c + 2 * (c + wide + wide);
  }
  default:
    return 0;
  }
}

/// Multiply-accumulates of one op-edge producing a spatial x spatial map.
constexpr Count op_flops(Operation op, Count channels, Count spatial, Count expansion = 6)
{
  const Count c = channels;
  const Count k = static_cast<Count>(kernel_size(op));
  const Count area = spatial * spatial;
  switch (op)
  {
  case Operation::max_pool_3x3:
  case Operation::avg_pool_3x3:
    return k * k * c * area;
  case Operation::sep_conv_3x3:
  case Operation::sep_conv_5x5:
  case Operation::dil_conv_3x3:
  case Operation::dil_conv_5x5:
    return (c * k * k + c * c) * area;
  case Operation::inv_res_3x3:
  case Operation::inv_res_5x5: {
    const Count wide = expansion * c;
    return (c * wide + wide * k * k + wide * c) * area;
  }
  default:
    return 0;
  }
}

/// NB201 ops are ReLU-Conv-BN for the convolutions; none/skip/pool carry no weights.
constexpr Count nb201_op_params(Nb201Op op, Count channels)
{
  const Count c = channels;
  switch (op)
  {
  case Nb201Op::nor_conv_1x1:
    return c * c + 2 * c;
  case Nb201Op::nor_conv_3x3:
    return 9 * c * c + 2 * c;
  default:
    return 0;
  }
}

constexpr Count nb201_op_flops(Nb201Op op, Count channels, Count spatial)
{
  const Count c = channels;
  const Count area = spatial * spatial;
  switch (op)
  {
  case Nb201Op::nor_conv_1x1:
    return c * c * area;
  case Nb201Op::nor_conv_3x3:
    return 9 * c * c * area;
  case Nb201Op::avg_pool_3x3:
    return 9 * c * area;
  default:
    return 0;
  }
}

// ---------------------------------------------------------------------------
// Whole-network cost
// ---------------------------------------------------------------------------

struct CellCost
{
  int index = 0;
  bool reduction = false;
  Count params = 0;
  Count flops = 0;
};

struct CostReport
{
  Count params = 0; // total, raw count
  Count flops = 0;  // total MACs
  Count stem_params = 0;
  Count stem_flops = 0;
  Count head_params = 0;
  Count head_flops = 0;
  std::vector<CellCost> per_cell;

  double params_m() const { return static_cast<double>(params) / 1e6; }
  double flops_m() const { return static_cast<double>(flops) / 1e6; }
};

namespace detail {

constexpr Count halve(Count spatial) { return (spatial + 1) / 2; }

inline CostReport cell_based_cost(const CellGenotype& g, const MacroConfig& macro)
{
  CostReport r;
  const Count t = static_cast<Count>(macro.inv_res_expansion);
  Count channels = static_cast<Count>(macro.init_channels);
  Count spatial = static_cast<Count>(macro.input_resolution);

  // stem: 3x3 conv 3 -> C, plus BN
  r.stem_params = 27 * channels + 2 * channels;
  r.stem_flops = 27 * channels * spatial * spatial;

  Count prev_prev_out = channels;
  Count prev_out = channels;
  for (int i = 0; i < macro.total_cells; ++i)
  {
    const bool reduction = macro.is_reduction(i);
    if (reduction)
      channels *= 2;
    const Count in_spatial = spatial;
    const Count out_spatial = reduction ? halve(spatial) : spatial;

    CellCost cc{i, reduction, 0, 0};
    // 1x1 conv + BN projecting each input to the working width; a strided
    // conv realigns X1 when the previous cell reduced
    cc.params += prev_prev_out * channels + 2 * channels;
    cc.params += prev_out * channels + 2 * channels;
    cc.flops += (prev_prev_out + prev_out) * channels * in_spatial * in_spatial;

    // every edge of a reduction cell produces the reduced map
    const Cell& cell = reduction ? g.reduction : g.normal;
    for (const Gene& gene : cell)
    {
      const auto op = static_cast<Operation>(gene.op);
      cc.params += op_params(op, channels, t);
      cc.flops += op_flops(op, channels, out_spatial, t);
    }
    r.per_cell.push_back(cc);

    prev_prev_out = prev_out;
    prev_out = kBlocksPerCell * channels;
    spatial = out_spatial;
  }

  // global average pooling (not counted) + linear classifier
  const Count classes = static_cast<Count>(macro.num_classes);
  r.head_params = prev_out * classes + classes;
  r.head_flops = prev_out * classes;
  return r;
}

inline CostReport nb201_cost(const Nb201Genotype& g, const MacroConfig& macro)
{
  CostReport r;
  Count channels = static_cast<Count>(macro.init_channels);
  Count spatial = static_cast<Count>(macro.input_resolution);

  r.stem_params = 27 * channels + 2 * channels;
  r.stem_flops = 27 * channels * spatial * spatial;

  for (int i = 0; i < macro.total_cells; ++i)
  {
    CellCost cc{i, macro.is_reduction(i), 0, 0};
    if (cc.reduction)
    {
      // residual block: 3x3 stride-2 conv + BN, 3x3 conv + BN,
      // shortcut 2x2 avg pool + 1x1 conv
      const Count in = channels;
      const Count out = 2 * channels;
      const Count out_spatial = halve(spatial);
      const Count area = out_spatial * out_spatial;
      cc.params = 9 * in * out + 2 * out + 9 * out * out + 2 * out + in * out;
      cc.flops = (9 * in * out + 9 * out * out + in * out) * area + 4 * in * area;
      channels = out;
      spatial = out_spatial;
    }
    else
    {
      for (const int op : g.ops)
      {
        cc.params += nb201_op_params(static_cast<Nb201Op>(op), channels);
        cc.flops += nb201_op_flops(static_cast<Nb201Op>(op), channels, spatial);
      }
    }
    r.per_cell.push_back(cc);
  }

  const Count classes = static_cast<Count>(macro.num_classes);
  r.head_params = channels * classes + classes;
  r.head_flops = channels * classes;
  return r;
}

} // namespace detail

/// Analytic parameter and MAC count of the network a genotype decodes to.
/// Throws ConfigError for an invalid macro and EncodingError for an invalid genotype.
inline CostReport architecture_cost(const Genotype& genotype, const MacroConfig& macro)
{
  macro.validate();
  if (auto v = validate(genotype); !v.empty())
    throw EncodingError(v.front().to_string());
  CostReport r = std::visit(
    [&](const auto& g) {
      if constexpr (std::is_same_v<std::decay_t<decltype(g)>, CellGenotype>)
        return detail::cell_based_cost(g, macro);
      else
        return detail::nb201_cost(g, macro);
    },
    genotype);
  r.params = r.stem_params + r.head_params;
  r.flops = r.stem_flops + r.head_flops;
  for (const auto& c : r.per_cell)
  {
    r.params += c.params;
    r.flops += c.flops;
  }
  return r;
}

inline nlohmann::json to_json(const CostReport& r)
{
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.per_cell)
    cells.push_back({{"cell", c.index},
                     {"reduction", c.reduction},
                     {"params", c.params},
                     {"flops", c.flops},
                     {"params_m", static_cast<double>(c.params) / 1e6},
                     {"flops_m", static_cast<double>(c.flops) / 1e6}});
  return {{"params_m", r.params_m()},
          {"flops_m", r.flops_m()},
          {"params", r.params},
          {"flops", r.flops},
          {"stem", {{"params", r.stem_params}, {"flops", r.stem_flops}}},
          {"head", {{"params", r.head_params}, {"flops", r.head_flops}}},
          {"per_cell", std::move(cells)}};
}

} // namespace eenas
