#include "doctest.h"
#include "test_support.hpp"

#include "neilf/sampling.hpp"

#include <Eigen/Geometry>

using namespace neilf;
using doctest::Approx;

namespace {

void check_frame(const Vec3& n) {
  const TangentFrame f = build_tangent_frame(n);
  CHECK(f.t.norm() == Approx(1.0).epsilon(1e-12));
  CHECK(f.bt.norm() == Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(f.t.dot(f.bt)) < 1e-12);
  CHECK(std::abs(f.t.dot(n)) < 1e-12);
  CHECK(std::abs(f.bt.dot(n)) < 1e-12);
  CHECK((f.t.cross(f.bt) - n).norm() < 1e-12);
}

}  // namespace

TEST_CASE("tangent frame conventions") {
  const TangentFrame up = build_tangent_frame(Vec3::UnitZ());
  CHECK((up.t - Vec3(1, 0, 0)).norm() == 0.0);
  CHECK((up.bt - Vec3(0, 1, 0)).norm() == 0.0);
  check_frame(-Vec3::UnitZ());
  check_frame(Vec3(1, 1, 1).normalized());
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 n = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
    check_frame(n);
  }
  CHECK_THROWS_AS(build_tangent_frame(Vec3(0, 0, 2)), Error);
  CHECK_THROWS_AS(build_tangent_frame(Vec3(NAN, 0, 1)), Error);
}

TEST_CASE("fibonacci lattice") {
  const auto one = fibonacci_hemisphere_local(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].z() == Approx(0.5).epsilon(1e-15));

  const auto set = fibonacci_hemisphere(128, build_tangent_frame(Vec3::UnitZ()));
  CHECK(set.solid_angle == Approx(kTwoPi / 128).epsilon(1e-15));
  double min_z = 1.0;
  for (const Vec3& d : set.directions) {
    CHECK(d.norm() == Approx(1.0).epsilon(1e-12));
    min_z = std::min(min_z, d.z());
  }
  CHECK(min_z > 0.0);

  const auto s256 = fibonacci_hemisphere(256, build_tangent_frame(Vec3::UnitZ()));
  double mean = 0.0;
  for (const Vec3& d : s256.directions) mean += d.z();
  mean /= 256.0;
  CHECK(std::abs(mean - 0.5) < 1e-3);
}

TEST_CASE("fibonacci quadrature of cosine") {
  for (int n : {64, 128, 256, 1024}) {
    const auto set = fibonacci_hemisphere(n, build_tangent_frame(Vec3(0.3, -0.2, 0.9).normalized()));
    const Vec3 normal = Vec3(0.3, -0.2, 0.9).normalized();
    const double integral = hemisphere_quadrature(set, [&](const Vec3& d) { return d.dot(normal); });
    CHECK(std::abs(integral - kPi) < 0.01);
  }
}

TEST_CASE("random hemisphere") {
  const TangentFrame f = build_tangent_frame(Vec3::UnitZ());
  const auto a = random_hemisphere(100000, f, 11);
  double mean = 0.0;
  for (const Vec3& d : a.directions) {
    CHECK(d.z() >= 0.0);
    mean += d.z();
  }
  mean /= static_cast<double>(a.size());
  CHECK(std::abs(mean - 0.5) < 0.01);
  CHECK(a.solid_angle == Approx(kTwoPi / 100000));

  const auto one = random_hemisphere(1, f, 5);
  CHECK(one.directions[0].z() > 0.0);

  const auto b1 = random_hemisphere(64, f, 42);
  const auto b2 = random_hemisphere(64, f, 42);
  REQUIRE(b1.size() == b2.size());
  CHECK(std::memcmp(b1.directions.data(), b2.directions.data(), sizeof(Vec3) * b1.size()) == 0);
}

TEST_CASE("rng stream is frozen") {
  // splitmix64 reference values for seed 0.
  Rng rng(0);
  CHECK(rng.next_u64() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next_u64() == 0x6E789E6AA1B965F4ULL);
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  Rng b(9);
  for (int i = 0; i < 1000; ++i) CHECK(b.below(7) < 7u);
}

TEST_CASE("sampler parsing") {
  CHECK(parse_sampler_kind("fibonacci") == SamplerKind::kFibonacci);
  CHECK(parse_sampler_kind("random") == SamplerKind::kRandom);
  CHECK_THROWS_AS(parse_sampler_kind("halton"), Error);
}
