#include "neilf/sampling.hpp"

#include <cmath>
#include <string>

namespace neilf {

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "fibonacci") return SamplerKind::kFibonacci;
  if (name == "random") return SamplerKind::kRandom;
  fail(Error::Kind::kInvalidArgument, "unknown sampler '" + std::string(name) + "' (expected fibonacci|random)");
}

std::string_view to_string(SamplerKind kind) { return kind == SamplerKind::kFibonacci ? "fibonacci" : "random"; }

TangentFrame build_tangent_frame(const Vec3& n) {
  if (!n.allFinite()) fail(Error::Kind::kInvalidArgument, "tangent frame: non-finite normal");
  if (std::abs(n.norm() - 1.0) > 1e-6) fail(Error::Kind::kInvalidArgument, "tangent frame: normal is not unit length");
  const double sign = std::copysign(1.0, n.z());
  const double a = -1.0 / (sign + n.z());
  const double b = n.x() * n.y() * a;
  TangentFrame f;
  f.t = Vec3(1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x());
  f.bt = Vec3(b, sign + n.y() * n.y() * a, -n.y());
  f.n = n;
  return f;
}

std::vector<Vec3> fibonacci_hemisphere_local(int count) {
  if (count < 1) fail(Error::Kind::kInvalidArgument, "fibonacci_hemisphere: count must be >= 1");
  // 1/phi, the golden ratio conjugate.
  const double golden_conj = (std::sqrt(5.0) - 1.0) / 2.0;
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double z = (k + 0.5) / count;
    const double frac = std::fmod(k * golden_conj, 1.0);
    const double phi = kTwoPi * frac;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

DirectionSet fibonacci_hemisphere(int count, const TangentFrame& frame) {
  DirectionSet set;
  set.solid_angle = kTwoPi / count;
  for (const Vec3& local : fibonacci_hemisphere_local(count)) set.directions.push_back(frame.to_world(local));
  return set;
}

DirectionSet random_hemisphere(int count, const TangentFrame& frame, std::uint64_t rng_seed) {
  if (count < 1) fail(Error::Kind::kInvalidArgument, "random_hemisphere: count must be >= 1");
  Rng rng(rng_seed);
  DirectionSet set;
  set.solid_angle = kTwoPi / count;
  set.directions.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    // 1 - u keeps z in (0, 1].
    const double z = 1.0 - rng.uniform();
    const double phi = kTwoPi * rng.uniform();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    set.directions.push_back(frame.to_world(Vec3(r * std::cos(phi), r * std::sin(phi), z)));
  }
  return set;
}

}  // namespace neilf
