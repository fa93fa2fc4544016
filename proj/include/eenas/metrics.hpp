#pragma once

#include "eenas/evolution.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eenas {

template <std::size_t N>
using Point = std::array<double, N>;

/// Indices of the non-dominated members, in input order.
template <class P>
std::vector<std::size_t> pareto_front_indices(std::span<const P> points)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
  {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j)
      dominated = j != i && dominates(points[j], points[i]);
    if (!dominated)
      out.push_back(i);
  }
  return out;
}

/// Maximal non-dominated subset, order stable by input index.
template <class P>
std::vector<P> pareto_front(std::span<const P> points)
{
  std::vector<P> out;
  for (const std::size_t i : pareto_front_indices(points))
    out.push_back(points[i]);
  return out;
}

namespace detail {

// points: clipped, inside the reference box
template <std::size_t N>
double hv_slices(std::vector<Point<N>> points, const Point<N>& ref)
{
  if (points.empty())
    return 0.0;
  if constexpr (N == 1)
  {
    double best = ref[0];
    for (const auto& p : points)
      best = std::min(best, p[0]);
    return ref[0] - best;
  }
  else if constexpr (N == 2)
  {
    std::sort(points.begin(), points.end());
    double volume = 0.0;
    double y_floor = ref[1];
    for (const auto& p : points)
    {
      if (p[1] < y_floor)
      {
        volume += (ref[0] - p[0]) * (y_floor - p[1]);
        y_floor = p[1];
      }
    }
    return volume;
  }
  else
  {
    // sweep the last objective; each slab holds the (N-1)-dimensional
    // volume of the points already passed
    std::sort(points.begin(), points.end(),
              [](const Point<N>& a, const Point<N>& b) { return a[N - 1] < b[N - 1]; });
    Point<N - 1> sub_ref;
    std::copy_n(ref.begin(), N - 1, sub_ref.begin());
    std::vector<Point<N - 1>> slice;
    double volume = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
    {
      Point<N - 1> q;
      std::copy_n(points[i].begin(), N - 1, q.begin());
      slice.push_back(q);
      const double top = i + 1 < points.size() ? points[i + 1][N - 1] : ref[N - 1];
      const double depth = top - points[i][N - 1];
      if (depth > 0.0)
        volume += depth * hv_slices<N - 1>(pareto_front<Point<N - 1>>(slice), sub_ref);
    }
    return volume;
  }
}

} // namespace detail

/// Exact hypervolume dominated by `points` and bounded by `ref` (minimisation).
/// Coordinates beyond the reference are clipped to it first.
template <std::size_t N>
double hypervolume(std::span<const Point<N>> points, const Point<N>& ref)
{
  std::vector<Point<N>> clipped;
  clipped.reserve(points.size());
  for (const auto& p : points)
  {
    Point<N> q;
    bool inside = true;
    for (std::size_t m = 0; m < N; ++m)
    {
      q[m] = std::min(p[m], ref[m]);
      inside = inside && q[m] < ref[m];
    }
    if (inside)
      clipped.push_back(q);
  }
  return detail::hv_slices<N>(pareto_front<Point<N>>(clipped), ref);
}

// ---------------------------------------------------------------------------
// Reference point and normalisation
// ---------------------------------------------------------------------------

inline constexpr double kNadirInflation = 1.01;

/// Per-objective upper bound used as the hypervolume reference.
struct ReferencePoint
{
  ObjectiveVector worst;

  friend bool operator==(const ReferencePoint&, const ReferencePoint&) = default;
};

/// Componentwise maximum of the first-generation objectives, inflated by 1%
/// so the boundary points still enclose a non-zero volume.
inline ReferencePoint nadir_from_first_generation(std::span<const ObjectiveVector> first_generation)
{
  if (first_generation.empty())
    throw std::invalid_argument("nadir of an empty population");
  ObjectiveVector w = first_generation.front();
  for (const auto& o : first_generation)
  {
    w.error = std::max(w.error, o.error);
    w.flops = std::max(w.flops, o.flops);
    w.params = std::max(w.params, o.params);
  }
  return {{w.error * kNadirInflation, w.flops * kNadirInflation, w.params * kNadirInflation}};
}

inline double hypervolume(std::span<const ObjectiveVector> front, const ReferencePoint& ref)
{
  std::vector<Point<3>> pts;
  pts.reserve(front.size());
  for (const auto& o : front)
    pts.push_back(o.values());
  return hypervolume<3>(pts, ref.worst.values());
}

/// Divides each objective by the reference and clips to [0, 1].
inline Point<3> normalize(const ObjectiveVector& o, const ReferencePoint& ref)
{
  Point<3> out;
  const auto v = o.values();
  const auto r = ref.worst.values();
  for (std::size_t m = 0; m < 3; ++m)
  {
    if (r[m] > 0.0)
      out[m] = std::clamp(v[m] / r[m], 0.0, 1.0);
    else
      out[m] = v[m] > 0.0 ? 1.0 : 0.0;
  }
  return out;
}

/// Hypervolume of the normalised front inside the unit cube, in [0, 1].
inline double normalized_hypervolume(std::span<const ObjectiveVector> front,
                                     const ReferencePoint& ref)
{
  std::vector<Point<3>> pts;
  pts.reserve(front.size());
  for (const auto& o : front)
    pts.push_back(normalize(o, ref));
  return hypervolume<3>(pts, Point<3>{1.0, 1.0, 1.0});
}

// ---------------------------------------------------------------------------
// Per-generation statistics
// ---------------------------------------------------------------------------

/// Summary of one generation of a search run.
struct GenerationRecord
{
  int generation = 0;
  // non-dominated set of all solutions evaluated up to this generation
  std::vector<std::string> front0; // serialized genotypes
  std::vector<ObjectiveVector> front0_objectives;
  std::size_t population_front0_size = 0; // rank-0 survivors
  std::vector<ObjectiveVector> population; // survivors of this generation
  ReferencePoint nadir;
  double hv = 0.0;
  double normalized_hv = 0.0;
  double best_error = 0.0;
  double mean_params = 0.0;
  std::size_t evals_used = 0; // cumulative evaluator calls
  double cost_units = 0.0;    // evaluation cost spent in this generation
};

struct HvPoint
{
  int generation = 0;
  double hv = 0.0;
  double normalized_hv = 0.0;
};

/// Recomputes the hypervolume series of a run. Each record is measured against
/// its own stored nadir, or against shared_nadir when comparing runs.
inline std::vector<HvPoint> normalized_hv_series(std::span<const GenerationRecord> records,
                                                 std::optional<ReferencePoint> shared_nadir = {})
{
  std::vector<HvPoint> out;
  out.reserve(records.size());
  for (const auto& r : records)
  {
    const ReferencePoint& ref = shared_nadir ? *shared_nadir : r.nadir;
    out.push_back({r.generation, hypervolume(r.front0_objectives, ref),
                   normalized_hypervolume(r.front0_objectives, ref)});
  }
  return out;
}

} // namespace eenas
