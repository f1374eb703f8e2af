#pragma once

// Hemisphere direction sets for the discretized rendering integral. Every set carries the same
// constant solid-angle weight 2*pi/N regardless of how its directions were placed.

#include "neilf/types.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace neilf {

enum class SamplerKind { kFibonacci, kRandom };

SamplerKind parse_sampler_kind(std::string_view name);
std::string_view to_string(SamplerKind kind);

// Orthonormal right-handed basis (t, bt, n).
struct TangentFrame {
  Vec3 t;
  Vec3 bt;
  Vec3 n;

  Vec3 to_world(const Vec3& local) const { return t * local.x() + bt * local.y() + n * local.z(); }
};

struct DirectionSet {
  std::vector<Vec3> directions;
  double solid_angle = 0.0;

  std::size_t size() const { return directions.size(); }
};

// Branchless frame keyed on sign(n.z). Throws on non-finite or non-unit input.
TangentFrame build_tangent_frame(const Vec3& n);

// Golden-angle spiral with z_k = (k + 0.5) / N in the frame's local coordinates.
std::vector<Vec3> fibonacci_hemisphere_local(int count);
DirectionSet fibonacci_hemisphere(int count, const TangentFrame& frame);

// i.i.d. uniform hemisphere directions; the weight stays 2*pi/N.
DirectionSet random_hemisphere(int count, const TangentFrame& frame, std::uint64_t rng_seed);

// Quadrature (2*pi/N) * sum f(d) over a direction set.
template <typename Fn>
double hemisphere_quadrature(const DirectionSet& set, Fn&& f) {
  double sum = 0.0;
  for (const Vec3& d : set.directions) sum += f(d);
  return set.solid_angle * sum;
}

// Deterministic 53-bit uniform in [0, 1) from a splitmix64 stream; used wherever results must be
// reproducible independent of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

 private:
  std::uint64_t state_;
};

}  // namespace neilf
