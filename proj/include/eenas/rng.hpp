#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace eenas {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a stream seed from a master seed and a path of coordinates,
/// e.g. (seed, generation, member). Distinct paths give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) noexcept
{
  std::uint64_t h = mix64(master);
  for (const auto p : path)
    h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Seeded random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// draws integers and reals with its own mappings, so a seed produces the same
/// values with every standard library.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n)
  {
    // rejection keeps the draw unbiased
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do
      x = engine_();
    while (x >= limit);
    return x % n;
  }

  int uniform_int(int lo, int hi) // inclusive
  {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

private:
  std::mt19937_64 engine_;
};

} // namespace eenas
