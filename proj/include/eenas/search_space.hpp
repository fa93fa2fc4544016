#pragma once

#include "eenas/rng.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace eenas {

enum class Space
{
  cell_based,
  nb201
};

inline std::string_view to_string(Space s)
{
  return s == Space::cell_based ? "cell_based" : "nb201";
}

inline std::optional<Space> space_from_string(std::string_view s)
{
  if (s == "cell_based")
    return Space::cell_based;
  if (s == "nb201")
    return Space::nb201;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Candidate operations of the cell-based space. Ids are the digits used in
/// the genotype text format.
enum class Operation : std::uint8_t
{
  max_pool_3x3 = 0,
  avg_pool_3x3 = 1,
  sep_conv_3x3 = 2,
  sep_conv_5x5 = 3,
  dil_conv_3x3 = 4,
  dil_conv_5x5 = 5,
  inv_res_3x3 = 6,
  inv_res_5x5 = 7,
  skip_connect = 8,
};

inline constexpr int kNumOperations = 9;

inline constexpr std::array<std::string_view, kNumOperations> kOperationNames{
  "max_pool_3x3", "avg_pool_3x3", "sep_conv_3x3", "sep_conv_5x5", "dil_conv_3x3",
  "dil_conv_5x5", "inv_res_3x3",  "inv_res_5x5",  "skip_connect"};

inline std::string_view name(Operation op) { return kOperationNames[static_cast<int>(op)]; }

inline std::optional<Operation> operation_from_id(int id)
{
  if (id < 0 || id >= kNumOperations)
    return std::nullopt;
  return static_cast<Operation>(id);
}

/// Kernel size of a convolution or pooling op; 0 for skip.
inline constexpr int kernel_size(Operation op)
{
  switch (op)
  {
  case Operation::sep_conv_5x5:
  case Operation::dil_conv_5x5:
  case Operation::inv_res_5x5:
    return 5;
  case Operation::skip_connect:
    return 0;
  default:
    return 3;
  }
}

/// Operations of the NAS-Bench-201 cell.
enum class Nb201Op : std::uint8_t
{
  none = 0,
  skip_connect = 1,
  nor_conv_1x1 = 2,
  nor_conv_3x3 = 3,
  avg_pool_3x3 = 4,
};

inline constexpr int kNumNb201Ops = 5;
inline constexpr int kNb201Edges = 6;
inline constexpr std::size_t kNb201SpaceSize = 15625; // 5^6

inline constexpr std::array<std::string_view, kNumNb201Ops> kNb201OpNames{
  "none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"};

inline std::string_view name(Nb201Op op) { return kNb201OpNames[static_cast<int>(op)]; }

// ---------------------------------------------------------------------------
// Genotypes
// ---------------------------------------------------------------------------

/// (operation, connection index) pair. Raw integers so that invalid genes can
/// be represented and reported by validate().
struct Gene
{
  int op = 0;
  int index = 0;

  friend bool operator==(const Gene&, const Gene&) = default;
};

inline constexpr int kBlocksPerCell = 4;
inline constexpr int kGenesPerCell = 8;
inline constexpr std::array<char, kBlocksPerCell> kBlockNames{'A', 'B', 'C', 'D'};

/// Block (A=0 .. D=3) that owns a gene position within a cell.
constexpr int block_of(int position) { return position / 2; }

/// Largest connection index allowed in a block: A={0}, B={0,1}, C={0,1,2}, D={0..3}.
constexpr int max_index(int block) { return block; }

/// Eight genes, two per block, in A1 A2 B1 B2 C1 C2 D1 D2 order.
using Cell = std::array<Gene, kGenesPerCell>;

struct CellGenotype
{
  Cell normal{};
  Cell reduction{};

  friend bool operator==(const CellGenotype&, const CellGenotype&) = default;
};

struct Nb201Genotype
{
  std::array<int, kNb201Edges> ops{};

  friend bool operator==(const Nb201Genotype&, const Nb201Genotype&) = default;
};

using Genotype = std::variant<CellGenotype, Nb201Genotype>;

inline Space space_of(const Genotype& g)
{
  return std::holds_alternative<CellGenotype>(g) ? Space::cell_based : Space::nb201;
}

/// Number of positions a mutation or crossover can act on.
inline int gene_positions(Space space)
{
  return space == Space::cell_based ? 2 * kGenesPerCell : kNb201Edges;
}

/// Error raised for structurally invalid genotypes.
class EncodingError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Maps a block-node connection index (2 or 3) to the block it reads from.
inline int previous_index(int index)
{
  if (index < 2)
    throw std::invalid_argument("previous_index: index " + std::to_string(index) +
                                " reads a cell input, not a block node");
  return index - 2;
}

/// Source of a gene's op-edge inside its cell.
struct NodeRef
{
  enum class Kind
  {
    input_x1,
    input_x2,
    block
  };
  Kind kind = Kind::input_x1;
  int block = -1; // valid for Kind::block

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

/// Index 0 reads X1, index 1 reads X2, index >= 2 reads block node index - 2.
inline NodeRef gene_source(const Gene& gene)
{
  switch (gene.index)
  {
  case 0:
    return {NodeRef::Kind::input_x1, -1};
  case 1:
    return {NodeRef::Kind::input_x2, -1};
  default:
    return {NodeRef::Kind::block, previous_index(gene.index)};
  }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation
{
  std::string where;   // e.g. "normal cell, block C, gene 1 (position 4)"
  std::string message; // e.g. "op id out of range"

  std::string to_string() const { return where + ": " + message; }
};

namespace detail {

inline std::string gene_location(std::string_view cell_name, int position)
{
  std::ostringstream os;
  os << cell_name << " cell, block " << kBlockNames[block_of(position)] << ", gene "
     << (position % 2 + 1) << " (position " << position << ")";
  return os.str();
}

inline void validate_gene(const Gene& g, int position, std::string_view cell_name,
                          std::vector<Violation>& out)
{
  const int block = block_of(position);
  if (g.op < 0 || g.op >= kNumOperations)
    out.push_back({gene_location(cell_name, position), "op id out of range"});
  if (g.index < 0 || g.index > max_index(block))
    out.push_back({gene_location(cell_name, position),
                   "index " + std::to_string(g.index) + " not allowed in block " +
                     std::string(1, kBlockNames[block])});
}

} // namespace detail

inline std::vector<Violation> validate_cell(const Cell& cell, std::string_view cell_name = "cell")
{
  std::vector<Violation> out;
  for (int p = 0; p < kGenesPerCell; ++p)
    detail::validate_gene(cell[p], p, cell_name, out);
  return out;
}

/// Empty result means the genotype is valid.
inline std::vector<Violation> validate(const Genotype& genotype)
{
  std::vector<Violation> out;
  if (const auto* c = std::get_if<CellGenotype>(&genotype))
  {
    for (int p = 0; p < kGenesPerCell; ++p)
      detail::validate_gene(c->normal[p], p, "normal", out);
    for (int p = 0; p < kGenesPerCell; ++p)
      detail::validate_gene(c->reduction[p], p, "reduction", out);
  }
  else
  {
    const auto& nb = std::get<Nb201Genotype>(genotype);
    for (int e = 0; e < kNb201Edges; ++e)
      if (nb.ops[e] < 0 || nb.ops[e] >= kNumNb201Ops)
        out.push_back({"edge " + std::to_string(e), "op id out of range"});
  }
  return out;
}

inline bool is_valid(const Genotype& g) { return validate(g).empty(); }

// ---------------------------------------------------------------------------
// Random sampling
// ---------------------------------------------------------------------------

inline Gene random_gene(Rng& rng, int position)
{
  Gene g;
  g.op = static_cast<int>(rng.below(kNumOperations));
  g.index = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_index(block_of(position))) + 1));
  return g;
}

inline Cell random_cell(Rng& rng)
{
  Cell c;
  for (int p = 0; p < kGenesPerCell; ++p)
    c[p] = random_gene(rng, p);
  return c;
}

inline Genotype random_genotype(Rng& rng, Space space)
{
  if (space == Space::cell_based)
  {
    CellGenotype g;
    g.normal = random_cell(rng);
    g.reduction = random_cell(rng);
    return g;
  }
  Nb201Genotype g;
  for (auto& op : g.ops)
    op = static_cast<int>(rng.below(kNumNb201Ops));
  return g;
}

/// NB201 genotype with the given mixed-radix rank in [0, 15625).
inline Nb201Genotype nb201_from_rank(std::size_t rank)
{
  Nb201Genotype g;
  for (int e = kNb201Edges - 1; e >= 0; --e)
  {
    g.ops[e] = static_cast<int>(rank % kNumNb201Ops);
    rank /= kNumNb201Ops;
  }
  return g;
}

inline std::vector<Genotype> enumerate_nb201()
{
  std::vector<Genotype> all;
  all.reserve(kNb201SpaceSize);
  for (std::size_t r = 0; r < kNb201SpaceSize; ++r)
    all.emplace_back(nb201_from_rank(r));
  return all;
}

/// Every edge skip_connect, every index 0.
inline Genotype all_skip_genotype(Space space)
{
  if (space == Space::cell_based)
  {
    CellGenotype g;
    for (auto& gene : g.normal)
      gene = {static_cast<int>(Operation::skip_connect), 0};
    g.reduction = g.normal;
    return g;
  }
  Nb201Genotype g;
  g.ops.fill(static_cast<int>(Nb201Op::skip_connect));
  return g;
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Malformed genotype text. position is a 0-based character offset.
class ParseError : public std::runtime_error
{
public:
  ParseError(const std::string& what, std::size_t position)
    : std::runtime_error(what + " (at character " + std::to_string(position) + ")")
    , position_(position)
  {
  }

  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

inline std::string serialize_cell(const Cell& cell)
{
  std::string out;
  for (int p = 0; p < kGenesPerCell; ++p)
  {
    if (p)
      out += '-';
    out += std::to_string(cell[p].op);
    out += std::to_string(cell[p].index);
  }
  return out;
}

/// "40-30-61-31-00-60-42-13/40-30-..." (normal/reduction) or "0,1,2,3,4,0".
inline std::string serialize(const Genotype& genotype)
{
  if (const auto* c = std::get_if<CellGenotype>(&genotype))
    return serialize_cell(c->normal) + "/" + serialize_cell(c->reduction);
  std::string out;
  const auto& nb = std::get<Nb201Genotype>(genotype);
  for (int e = 0; e < kNb201Edges; ++e)
  {
    if (e)
      out += ',';
    out += std::to_string(nb.ops[e]);
  }
  return out;
}

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Parses 8 hyphen-separated digit pairs starting at text[offset].
inline Cell parse_cell_at(std::string_view text, std::size_t offset, std::string_view cell_name)
{
  Cell cell;
  std::size_t pos = 0;
  for (int p = 0; p < kGenesPerCell; ++p)
  {
    if (p > 0)
    {
      if (pos >= text.size())
        throw ParseError("too few gene pairs in " + std::string(cell_name) + " cell: expected " +
                           std::to_string(kGenesPerCell) + ", got " + std::to_string(p),
                         offset + pos);
      if (text[pos] != '-')
        throw ParseError("expected '-' after pair " + std::to_string(p - 1) + " in " +
                           std::string(cell_name) + " cell",
                         offset + pos);
      ++pos;
    }
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] != '-')
      ++pos;
    const std::string_view pair = text.substr(start, pos - start);
    if (pair.size() != 2 || !is_digit(pair[0]) || !is_digit(pair[1]))
      throw ParseError("malformed gene pair '" + std::string(pair) + "' at position " +
                         std::to_string(p) + " of " + std::string(cell_name) +
                         " cell (expected two digits)",
                       offset + start);
    cell[p] = {pair[0] - '0', pair[1] - '0'};
    std::vector<Violation> v;
    validate_gene(cell[p], p, cell_name, v);
    if (!v.empty())
      throw ParseError("invalid gene pair '" + std::string(pair) + "' in " + v.front().where +
                         ": " + v.front().message,
                       offset + start);
  }
  if (pos != text.size())
    throw ParseError("too many gene pairs in " + std::string(cell_name) + " cell", offset + pos);
  return cell;
}

} // namespace detail

/// Parses a single 8-pair cell such as "40-30-61-31-00-60-42-13".
inline Cell parse_cell(std::string_view text) { return detail::parse_cell_at(text, 0, "single"); }

/// Inverse of serialize(). Rejects structurally malformed text and genes that
/// violate the per-block index sets.
inline Genotype parse(std::string_view text)
{
  if (text.empty())
    throw ParseError("empty genotype", 0);
  if (text.find(',') != std::string_view::npos)
  {
    Nb201Genotype g;
    std::size_t pos = 0;
    for (int e = 0; e < kNb201Edges; ++e)
    {
      if (e > 0)
      {
        if (pos >= text.size())
          throw ParseError("too few NB201 ops: expected 6, got " + std::to_string(e), pos);
        if (text[pos] != ',')
          throw ParseError("expected ',' after op " + std::to_string(e - 1), pos);
        ++pos;
      }
      if (pos >= text.size() || !detail::is_digit(text[pos]))
        throw ParseError("expected an op digit for edge " + std::to_string(e), pos);
      const int op = text[pos] - '0';
      if (op >= kNumNb201Ops)
        throw ParseError("NB201 op " + std::to_string(op) + " out of range on edge " +
                           std::to_string(e),
                         pos);
      g.ops[e] = op;
      ++pos;
    }
    if (pos != text.size())
      throw ParseError("trailing characters after 6 NB201 ops", pos);
    return g;
  }

  const auto slash = text.find('/');
  if (slash == std::string_view::npos)
  {
    // a single cell: report a count-aware error if it is short
    detail::parse_cell_at(text, 0, "normal");
    throw ParseError("missing '/' and reduction cell", text.size());
  }
  if (text.find('/', slash + 1) != std::string_view::npos)
    throw ParseError("more than two cells", text.find('/', slash + 1));
  CellGenotype g;
  g.normal = detail::parse_cell_at(text.substr(0, slash), 0, "normal");
  g.reduction = detail::parse_cell_at(text.substr(slash + 1), slash + 1, "reduction");
  return g;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

enum class NodeRole
{
  cell_input_x1,
  cell_input_x2,
  block_node,
  cell_output
};

inline std::string_view to_string(NodeRole r)
{
  switch (r)
  {
  case NodeRole::cell_input_x1:
    return "cell_input_x1";
  case NodeRole::cell_input_x2:
    return "cell_input_x2";
  case NodeRole::block_node:
    return "block_node";
  default:
    return "cell_output";
  }
}

/// Operation carried by an op-edge, tagged with the space it belongs to.
struct OpLabel
{
  Space space = Space::cell_based;
  int id = 0;

  std::string_view name() const
  {
    return space == Space::cell_based ? eenas::name(static_cast<Operation>(id))
                                      : eenas::name(static_cast<Nb201Op>(id));
  }

  friend bool operator==(const OpLabel&, const OpLabel&) = default;
};

struct GraphNode
{
  int id = 0;
  NodeRole role = NodeRole::block_node;
};

/// op set: an operation edge; op empty: concatenation edge into the cell output.
struct GraphEdge
{
  int src = 0;
  int dst = 0;
  std::optional<OpLabel> op;
};

struct CellGraph
{
  std::string name;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  std::size_t op_edge_count() const
  {
    std::size_t n = 0;
    for (const auto& e : edges)
      n += e.op.has_value();
    return n;
  }

  /// Kahn's algorithm over all edges.
  bool is_acyclic() const
  {
    std::vector<int> indeg(nodes.size(), 0);
    for (const auto& e : edges)
      ++indeg[e.dst];
    std::vector<int> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (indeg[i] == 0)
        ready.push_back(static_cast<int>(i));
    std::size_t seen = 0;
    while (!ready.empty())
    {
      const int n = ready.back();
      ready.pop_back();
      ++seen;
      for (const auto& e : edges)
        if (e.src == n && --indeg[e.dst] == 0)
          ready.push_back(e.dst);
    }
    return seen == nodes.size();
  }
};

struct ArchitectureGraph
{
  std::vector<CellGraph> cells; // normal, reduction; or one NB201 cell
};

/// Node ids inside a decoded cell-based cell.
inline constexpr int kNodeX1 = 0;
inline constexpr int kNodeX2 = 1;
inline constexpr int block_node_id(int block) { return 2 + block; }
inline constexpr int kNodeOutput = 6;

inline int node_id(const NodeRef& ref)
{
  switch (ref.kind)
  {
  case NodeRef::Kind::input_x1:
    return kNodeX1;
  case NodeRef::Kind::input_x2:
    return kNodeX2;
  default:
    return block_node_id(ref.block);
  }
}

/// Decodes one cell. Each block node sums its two op-edges; the output
/// concatenates the four block nodes.
inline CellGraph decode_cell(const Cell& cell, std::string name = "cell")
{
  if (auto v = validate_cell(cell, name); !v.empty())
    throw EncodingError(v.front().to_string());
  CellGraph g;
  g.name = std::move(name);
  g.nodes.push_back({kNodeX1, NodeRole::cell_input_x1});
  g.nodes.push_back({kNodeX2, NodeRole::cell_input_x2});
  for (int b = 0; b < kBlocksPerCell; ++b)
    g.nodes.push_back({block_node_id(b), NodeRole::block_node});
  g.nodes.push_back({kNodeOutput, NodeRole::cell_output});
  for (int p = 0; p < kGenesPerCell; ++p)
    g.edges.push_back({node_id(gene_source(cell[p])), block_node_id(block_of(p)),
                       OpLabel{Space::cell_based, cell[p].op}});
  for (int b = 0; b < kBlocksPerCell; ++b)
    g.edges.push_back({block_node_id(b), kNodeOutput, std::nullopt});
  return g;
}

/// Edge endpoints of the NB201 cell, in genotype order (1<-0, 2<-0, 2<-1, 3<-0, 3<-1, 3<-2).
inline constexpr std::array<std::pair<int, int>, kNb201Edges> kNb201EdgeEnds{
  {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};

inline ArchitectureGraph decode(const Genotype& genotype)
{
  if (auto v = validate(genotype); !v.empty())
    throw EncodingError(v.front().to_string());
  ArchitectureGraph out;
  if (const auto* c = std::get_if<CellGenotype>(&genotype))
  {
    out.cells.push_back(decode_cell(c->normal, "normal"));
    out.cells.push_back(decode_cell(c->reduction, "reduction"));
    return out;
  }
  const auto& nb = std::get<Nb201Genotype>(genotype);
  CellGraph g;
  g.name = "nb201";
  g.nodes = {{0, NodeRole::cell_input_x1},
             {1, NodeRole::block_node},
             {2, NodeRole::block_node},
             {3, NodeRole::cell_output}};
  for (int e = 0; e < kNb201Edges; ++e)
    g.edges.push_back(
      {kNb201EdgeEnds[e].first, kNb201EdgeEnds[e].second, OpLabel{Space::nb201, nb.ops[e]}});
  out.cells.push_back(std::move(g));
  return out;
}

/// Graphviz export. Node labels are roles, edge labels operation names.
inline std::string to_dot(const ArchitectureGraph& graph)
{
  std::ostringstream os;
  os << "digraph architecture {\n  rankdir=LR;\n";
  for (const auto& cell : graph.cells)
  {
    os << "  subgraph cluster_" << cell.name << " {\n    label=\"" << cell.name << "\";\n";
    for (const auto& n : cell.nodes)
      os << "    " << cell.name << "_" << n.id << " [label=\"" << to_string(n.role) << "\"];\n";
    for (const auto& e : cell.edges)
    {
      os << "    " << cell.name << "_" << e.src << " -> " << cell.name << "_" << e.dst;
      if (e.op)
        os << " [label=\"" << e.op->name() << "\"]";
      else
        os << " [label=\"concat\", style=dashed]";
      os << ";\n";
    }
    os << "  }\n";
  }
  os << "}\n";
  return os.str();
}

} // namespace eenas
