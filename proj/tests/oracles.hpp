#pragma once

// Independent reference implementations used to check the library.
// Nothing here calls the code under test except decode() for the edge list.

#include "eenas/search_space.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using u64 = std::uint64_t;

// ---------------------------------------------------------------------------
// Cost: list every weight tensor of the network, then sum.
// ---------------------------------------------------------------------------

struct Tensor
{
  std::string name;
  std::vector<u64> shape;
  u64 out_area = 0; // spatial positions the tensor is applied at
  bool mac = true;  // false for batch-norm affine and biases

  u64 numel() const
  {
    return std::accumulate(shape.begin(), shape.end(), u64{1}, std::multiplies<>());
  }
};

struct Pool
{
  u64 channels = 0;
  u64 window = 0; // kernel side
  u64 out_area = 0;
};

struct Network
{
  std::vector<Tensor> tensors;
  std::vector<Pool> pools;

  void conv(const std::string& name, u64 out, u64 in_per_group, u64 k, u64 area)
  {
    tensors.push_back({name, {out, in_per_group, k, k}, area, true});
  }
  void bn(const std::string& name, u64 c)
  {
    tensors.push_back({name + ".gamma", {c}, 0, false});
    tensors.push_back({name + ".beta", {c}, 0, false});
  }

  u64 params() const
  {
    u64 s = 0;
    for (const auto& t : tensors)
      s += t.numel();
    return s;
  }
  u64 flops() const
  {
    u64 s = 0;
    for (const auto& t : tensors)
      if (t.mac)
        s += t.numel() * t.out_area;
    for (const auto& p : pools)
      s += p.window * p.window * p.channels * p.out_area;
    return s;
  }
};

inline int kernel_from_name(const std::string& op)
{
  return op.find("5x5") != std::string::npos ? 5 : 3;
}

/// Tensors of one op-edge of the cell-based space, keyed by the op's name.
inline void add_cell_op(Network& net, const std::string& prefix, const std::string& op, u64 c,
                        u64 area, u64 t)
{
  const u64 k = static_cast<u64>(kernel_from_name(op));
  if (op.rfind("sep_conv", 0) == 0 || op.rfind("dil_conv", 0) == 0)
  {
    net.conv(prefix + ".depthwise", c, 1, k, area);
    net.conv(prefix + ".pointwise", c, c, 1, area);
    net.bn(prefix + ".bn", c);
  }
  else if (op.rfind("inv_res", 0) == 0)
  {
    net.conv(prefix + ".expand", t * c, c, 1, area);
    net.bn(prefix + ".bn_expand", t * c);
    net.conv(prefix + ".depthwise", t * c, 1, k, area);
    net.bn(prefix + ".bn_depthwise", t * c);
    net.conv(prefix + ".project", c, t * c, 1, area);
    net.bn(prefix + ".bn_project", c);
  }
  else if (op.find("pool") != std::string::npos)
    net.pools.push_back({c, 3, area});
  // skip_connect: identity, no tensors
}

struct Macro
{
  int cells = 8;
  int channels = 32;
  int resolution = 32;
  int expansion = 6;
  int classes = 10;
};

inline bool reduction_at(int i, int cells) { return i == cells / 3 || i == (2 * cells) / 3; }

/// Whole cell-based network: stem, `cells` stacked cells with two 1x1
/// preprocessing convs each, linear head.
inline Network cell_based_network(const eenas::Genotype& g, const Macro& m)
{
  const auto graph = eenas::decode(g);
  const auto& normal = graph.cells.at(0);
  const auto& reduce = graph.cells.at(1);
  Network net;
  u64 c = static_cast<u64>(m.channels);
  u64 s = static_cast<u64>(m.resolution);
  net.conv("stem.conv", c, 3, 3, s * s);
  net.bn("stem.bn", c);
  u64 in0 = c, in1 = c;
  for (int i = 0; i < m.cells; ++i)
  {
    const bool red = reduction_at(i, m.cells);
    const std::string p = "cell" + std::to_string(i);
    if (red)
      c *= 2;
    const u64 out_s = red ? (s + 1) / 2 : s;
    net.conv(p + ".pre0", c, in0, 1, s * s);
    net.bn(p + ".pre0.bn", c);
    net.conv(p + ".pre1", c, in1, 1, s * s);
    net.bn(p + ".pre1.bn", c);
    const auto& cell = red ? reduce : normal;
    int e = 0;
    for (const auto& edge : cell.edges)
      if (edge.op)
        add_cell_op(net, p + ".edge" + std::to_string(e++), std::string(edge.op->name()), c,
                    out_s * out_s, static_cast<u64>(m.expansion));
    in0 = in1;
    in1 = 4 * c;
    s = out_s;
  }
  const u64 k = static_cast<u64>(m.classes);
  net.tensors.push_back({"head.weight", {k, in1}, 1, true});
  net.tensors.push_back({"head.bias", {k}, 0, false});
  return net;
}

/// NB201 macro: `cells` positions, residual down-sampling blocks at the
/// reduction positions, the searched cell everywhere else.
inline Network nb201_network(const eenas::Genotype& g, const Macro& m)
{
  const auto cell = eenas::decode(g).cells.at(0);
  Network net;
  u64 c = static_cast<u64>(m.channels);
  u64 s = static_cast<u64>(m.resolution);
  net.conv("stem.conv", c, 3, 3, s * s);
  net.bn("stem.bn", c);
  for (int i = 0; i < m.cells; ++i)
  {
    const std::string p = "cell" + std::to_string(i);
    if (reduction_at(i, m.cells))
    {
      const u64 out_s = (s + 1) / 2;
      const u64 a = out_s * out_s;
      net.conv(p + ".conv_a", 2 * c, c, 3, a);
      net.bn(p + ".bn_a", 2 * c);
      net.conv(p + ".conv_b", 2 * c, 2 * c, 3, a);
      net.bn(p + ".bn_b", 2 * c);
      net.pools.push_back({c, 2, a});
      net.conv(p + ".shortcut", 2 * c, c, 1, a);
      c *= 2;
      s = out_s;
      continue;
    }
    int e = 0;
    for (const auto& edge : cell.edges)
    {
      const std::string op(edge.op->name());
      const std::string q = p + ".edge" + std::to_string(e++);
      if (op == "nor_conv_1x1" || op == "nor_conv_3x3")
      {
        net.conv(q + ".conv", c, c, op == "nor_conv_1x1" ? 1 : 3, s * s);
        net.bn(q + ".bn", c);
      }
      else if (op == "avg_pool_3x3")
        net.pools.push_back({c, 3, s * s});
    }
  }
  const u64 k = static_cast<u64>(m.classes);
  net.tensors.push_back({"head.weight", {k, c}, 1, true});
  net.tensors.push_back({"head.bias", {k}, 0, false});
  return net;
}

// ---------------------------------------------------------------------------
// Dominance
// ---------------------------------------------------------------------------

template <class V>
bool dominates(const V& a, const V& b)
{
  bool strictly = false;
  for (std::size_t m = 0; m < a.size(); ++m)
  {
    if (a[m] > b[m])
      return false;
    if (a[m] < b[m])
      strictly = true;
  }
  return strictly;
}

/// Peels non-dominated layers with an O(n^2) scan per layer. Each layer is
/// sorted by index.
template <class V>
std::vector<std::vector<std::size_t>> fronts(const std::vector<V>& pts)
{
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> taken(pts.size(), false);
  std::size_t left = pts.size();
  while (left > 0)
  {
    std::vector<std::size_t> layer;
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
      if (taken[i])
        continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
        dominated = !taken[j] && j != i && dominates(pts[j], pts[i]);
      if (!dominated)
        layer.push_back(i);
    }
    for (const auto i : layer)
      taken[i] = true;
    left -= layer.size();
    out.push_back(layer);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hypervolume by sampling
// ---------------------------------------------------------------------------

/// Fraction of `samples` uniform points in [0, ref] dominated by some point of
/// the front, times the box volume.
inline double monte_carlo_hv(const std::vector<std::array<double, 3>>& front,
                             const std::array<double, 3>& ref, std::size_t samples,
                             std::uint64_t seed)
{
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // sorting by the first coordinate lets the scan stop early
  auto pts = front;
  std::sort(pts.begin(), pts.end());
  std::size_t hit = 0;
  for (std::size_t n = 0; n < samples; ++n)
  {
    const double x = u(gen) * ref[0], y = u(gen) * ref[1], z = u(gen) * ref[2];
    for (const auto& p : pts)
    {
      if (p[0] > x)
        break;
      if (p[1] <= y && p[2] <= z)
      {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(samples) * ref[0] * ref[1] * ref[2];
}

/// Random mutually non-dominated 3-d points in the unit cube, drawn near the
/// simplex x + y + z = 1.5.
inline std::vector<std::array<double, 3>> random_front(std::size_t max_points, std::uint64_t seed)
{
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::array<double, 3>> cand;
  while (cand.size() < max_points)
  {
    std::array<double, 3> p{u(gen), u(gen), u(gen)};
    const double s = p[0] + p[1] + p[2];
    if (s <= 0.0)
      continue;
    for (auto& v : p)
      v = std::min(0.999, v / s * (1.5 + 0.2 * (u(gen) - 0.5)));
    cand.push_back(p);
  }
  std::vector<std::array<double, 3>> out;
  for (std::size_t i = 0; i < cand.size(); ++i)
  {
    bool dominated = false;
    for (std::size_t j = 0; j < cand.size() && !dominated; ++j)
      dominated = j != i && dominates(cand[j], cand[i]);
    if (!dominated)
      out.push_back(cand[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// |observed - expected| in binomial standard deviations.
inline double binomial_z(std::size_t hits, std::size_t trials, double p)
{
  const double mean = static_cast<double>(trials) * p;
  const double sd = std::sqrt(static_cast<double>(trials) * p * (1.0 - p));
  return std::abs(static_cast<double>(hits) - mean) / sd;
}

/// Pearson chi-square statistic against a uniform distribution over counts.size() cells.
inline double chi_square_uniform(const std::vector<std::size_t>& counts)
{
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const double expected = total / static_cast<double>(counts.size());
  double chi = 0.0;
  for (const auto c : counts)
    chi += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  return chi;
}

/// One-sided sign-test p-value: P(X >= successes) for X ~ Binomial(n, 1/2).
inline double sign_test_p(int successes, int n)
{
  double p = 0.0;
  for (int k = successes; k <= n; ++k)
  {
    double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    p += std::exp(log_c - n * std::log(2.0));
  }
  return p;
}

} // namespace oracle
