#include "doctest.h"
#include "test_support.hpp"

#include "neilf/render.hpp"

#include <cmath>

using namespace neilf;
using doctest::Approx;

namespace {

using MatD = Matrix<double>;

SurfacePoint make_point(const Vec3& x, const Vec3& n, const Vec3& wo) {
  SurfacePoint p;
  p.x = x;
  p.n = n.normalized();
  p.wo = wo.normalized();
  return p;
}

BrdfParams lambertian(const Spectrum& b) {
  BrdfParams p;
  p.base_color = b;
  p.roughness = 1.0;
  p.metallic = 0.0;
  return p;
}

Spectrum smooth_sky(const Vec3&, const Vec3& d) {
  const double t = 0.5 * (d.z() + 1.0);
  return Spectrum(0.3 + 0.7 * t, 0.4 + 0.4 * t * t, 0.9 - 0.3 * t);
}

}  // namespace

TEST_CASE("white furnace with the learned-field quadrature") {
  RenderOptions opts;
  opts.brdf.specular = false;
  const Spectrum b(0.5, 0.25, 0.8);
  const double L = 1.7;
  const LightingFn constant = [&](const Vec3&, const Vec3&) { return Spectrum::Constant(L); };
  for (const Vec3& n : {Vec3(0, 0, 1), Vec3(0.3, -0.4, 0.8), Vec3(0, 0, -1)}) {
    const SurfacePoint pt = make_point(Vec3(0.1, 0.2, 0.3), n, n + Vec3(0.2, 0.1, 0.0));
    opts.samples = 128;
    const Spectrum o128 = render_point(pt, constant, lambertian(b), opts);
    opts.samples = 256;
    const Spectrum o256 = render_point(pt, constant, lambertian(b), opts);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(o128[c] / (b[c] * L) - 1.0) < 0.01);
      CHECK(std::abs(o256[c] / (b[c] * L) - 1.0) < 0.005);
    }
  }
}

TEST_CASE("zero lighting renders black") {
  RenderOptions opts;
  BrdfParams p;
  p.base_color = Spectrum(0.9, 0.5, 0.1);
  p.roughness = 0.2;
  p.metallic = 0.7;
  const LightingFn dark = [](const Vec3&, const Vec3&) { return Spectrum::Zero(); };
  const Spectrum o = render_point(make_point(Vec3::Zero(), Vec3::UnitZ(), Vec3(0.3, 0, 1)), dark, p, opts);
  CHECK(o.norm() == 0.0);
}

TEST_CASE("doubling the sample count approaches the dense reference") {
  BrdfParams p;
  p.base_color = Spectrum(0.7, 0.5, 0.3);
  p.roughness = 0.6;
  p.metallic = 0.2;
  RenderOptions opts;
  for (const Vec3& n : {Vec3(0, 0, 1), Vec3(0.5, 0.2, 0.8)}) {
    const SurfacePoint pt = make_point(Vec3::Zero(), n, Vec3(0.4, -0.3, 1.0));
    opts.samples = 4096;
    const Spectrum ref = render_point(pt, smooth_sky, p, opts);
    double prev = 1e9;
    for (int s : {32, 64, 128, 256}) {
      opts.samples = s;
      const double err = (render_point(pt, smooth_sky, p, opts) - ref).norm();
      CAPTURE(s);
      CHECK(err <= prev);
      prev = err;
    }
  }
}

TEST_CASE("tonemap values") {
  const Spectrum t = tonemap<double>(Spectrum::Constant(0.5), 1.0 / 2.2);
  CHECK(t.x() == Approx(0.72974005284072310).epsilon(1e-14));
  CHECK(tonemap<double>(Spectrum(-1.0, 0.0, 4.0), 0.5).x() == Approx(std::pow(kToneFloor, 0.5)));
  CHECK(tonemap<double>(Spectrum(-1.0, 0.0, 4.0), 0.5).z() == 1.0);
  for (double g : {0.2, 1.0 / 2.2, 1.0, 3.0}) {
    double prev = -1.0;
    for (double h = 0.0; h <= 1.0; h += 0.05) {
      const double v = tonemap<double>(Spectrum::Constant(h), g).x();
      CHECK(v >= prev);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
  }
}

TEST_CASE("tonemap tape gradients") {
  MatD hdr(2, 3);
  hdr << 0.2, 0.5, 0.8, 0.05, 0.35, 0.6;
  MatD lg(1, 1);
  lg << std::log(1.0 / 2.2);
  Rng rng(3);
  MatD w = MatD::Random(2, 3);

  auto f = [&](const MatD& h, const MatD& l) {
    Tape<double> t;
    return (t.value(tonemap(t, t.constant(h), t.constant(l))).array() * w.array()).sum();
  };
  Tape<double> tape;
  Var vh = tape.variable(hdr), vl = tape.variable(lg);
  tape.backward(ad::sum(tape, ad::mul(tape, tonemap(tape, vh, vl), tape.constant(w))));
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < hdr.size(); ++i) {
    MatD p = hdr, m = hdr;
    p.data()[i] += h;
    m.data()[i] -= h;
    CHECK(tape.grad(vh).data()[i] == Approx((f(p, lg) - f(m, lg)) / (2 * h)).epsilon(1e-6));
  }
  MatD lp = lg, lm = lg;
  lp(0, 0) += h;
  lm(0, 0) -= h;
  CHECK(tape.grad(vl)(0, 0) == Approx((f(hdr, lp) - f(hdr, lm)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("render_radiance gradients match finite differences") {
  RenderOptions opts;
  opts.samples = 16;
  std::vector<SurfacePoint> pts = {make_point(Vec3(0.1, 0, 0), Vec3(0, 0, 1), Vec3(0.3, 0.2, 1)),
                                   make_point(Vec3(0, 0.2, 0), Vec3(0.2, 0.6, 0.7), Vec3(0, 0.3, 1))};
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i].pixel = PixelId{0, 0, static_cast<int>(i)};
  const auto geom = build_sample_geometry<double>(pts, opts);

  for (FresnelMode mode : {FresnelMode::kPrinted, FresnelMode::kSchlick}) {
    BrdfOptions bo;
    bo.fresnel = mode;
    MatD brdf(2, kBrdfChannels);
    brdf << 0.6, 0.4, 0.2, 0.45, 0.3, 0.2, 0.7, 0.5, 0.8, 0.6;
    Rng rng(11);
    MatD light(2 * opts.samples, 3);
    for (Eigen::Index i = 0; i < light.size(); ++i) light.data()[i] = rng.uniform(0.2, 2.0);
    const MatD w = MatD::Random(2, 3);

    auto f = [&](const MatD& b, const MatD& l) {
      Tape<double> t;
      return (t.value(render_radiance(t, t.constant(b), t.constant(l), geom, bo)).array() * w.array()).sum();
    };
    Tape<double> tape;
    Var vb = tape.variable(brdf), vl = tape.variable(light);
    tape.backward(ad::sum(tape, ad::mul(tape, render_radiance(tape, vb, vl, geom, bo), tape.constant(w))));
    const MatD gb = tape.grad(vb), gl = tape.grad(vl);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < brdf.size(); ++i) {
      MatD p = brdf, m = brdf;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (f(p, light) - f(m, light)) / (2 * h);
      CHECK(std::abs(gb.data()[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
    for (Eigen::Index i = 0; i < light.size(); i += 5) {
      MatD p = light, m = light;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (f(brdf, p) - f(brdf, m)) / (2 * h);
      CHECK(std::abs(gl.data()[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("fused quadrature agrees with the reference loop") {
  RenderOptions opts;
  opts.samples = 64;
  SurfacePoint pt = make_point(Vec3(0.2, -0.1, 0.4), Vec3(0.1, 0.3, 0.9), Vec3(-0.2, 0.5, 1.0));
  BrdfParams p;
  p.base_color = Spectrum(0.3, 0.6, 0.9);
  p.roughness = 0.4;
  p.metallic = 0.3;
  const Spectrum ref = render_point(pt, smooth_sky, p, opts);

  const std::vector<SurfacePoint> pts{pt};
  const auto geom = build_sample_geometry<double>(pts, opts);
  MatD brdf(1, kBrdfChannels);
  brdf << p.base_color.x(), p.base_color.y(), p.base_color.z(), p.roughness, p.metallic;
  MatD light(opts.samples, 3);
  for (int k = 0; k < opts.samples; ++k)
    light.row(k) = smooth_sky(pt.x, geom->dirs.row(k).transpose()).transpose();
  Tape<double> tape;
  const MatD out = tape.value(render_radiance(tape, tape.constant(brdf), tape.constant(light), geom, opts.brdf));
  for (int c = 0; c < 3; ++c) CHECK(out(0, c) == Approx(ref[c]).epsilon(1e-12));
}

TEST_CASE("random sampler is seeded per pixel") {
  RenderOptions opts;
  opts.sampler = SamplerKind::kRandom;
  opts.samples = 8;
  opts.seed = 5;
  SurfacePoint a = make_point(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitZ());
  SurfacePoint b = a;
  b.pixel.col = 1;
  const DirectionSet da = sample_directions(a, opts), da2 = sample_directions(a, opts), db = sample_directions(b, opts);
  CHECK(da.directions == da2.directions);
  CHECK(da.directions != db.directions);
  CHECK(da.solid_angle == Approx(kTwoPi / 8));
}
