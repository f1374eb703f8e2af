#pragma once

// Simplified Disney BRDF: Lambertian diffuse lobe plus a microfacet specular lobe built from a
// spherical-Gaussian NDF, a Schlick-style Fresnel term and a separable GGX geometry term.
// Everything here is a pure function templated on the scalar type so the same code serves the
// 32-bit training path and the 64-bit gradient checks.

#include "neilf/types.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

namespace neilf {

// kPrinted: F0 + (1 - F0)(1 - (o.h)^5).  kSchlick: F0 + (1 - F0)(1 - o.h)^5.
enum class FresnelMode { kPrinted, kSchlick };

FresnelMode parse_fresnel_mode(std::string_view name);
std::string_view to_string(FresnelMode mode);

struct BrdfOptions {
  FresnelMode fresnel = FresnelMode::kPrinted;
  bool specular = true;
};

inline constexpr double kDielectricF0 = 0.04;

template <typename Real>
Real ndf_sg(Real h_dot_n, Real r) {
  const Real r2 = r * r;
  return std::exp((Real(2) / r2) * (h_dot_n - Real(1))) / (Real(kPi) * r2);
}

template <typename Real>
Real dndf_sg_dr(Real h_dot_n, Real r) {
  const Real d = ndf_sg(h_dot_n, r);
  return d * (Real(-4) * (h_dot_n - Real(1)) / (r * r * r) - Real(2) / r);
}

// Blend weight w with F = F0 + (1 - F0) w.
template <typename Real>
Real fresnel_weight(Real o_dot_h, FresnelMode mode) {
  if (mode == FresnelMode::kPrinted) {
    const Real c2 = o_dot_h * o_dot_h;
    return Real(1) - c2 * c2 * o_dot_h;
  }
  const Real t = Real(1) - o_dot_h;
  const Real t2 = t * t;
  return t2 * t2 * t;
}

template <typename Real>
SpectrumT<Real> fresnel_f0(const SpectrumT<Real>& b, Real m) {
  return (SpectrumT<Real>::Constant(Real(kDielectricF0) * (Real(1) - m)) + b * m).eval();
}

template <typename Real>
SpectrumT<Real> fresnel_schlick(Real o_dot_h, const SpectrumT<Real>& b, Real m,
                                FresnelMode mode = FresnelMode::kPrinted) {
  const SpectrumT<Real> f0 = fresnel_f0(b, m);
  const Real w = fresnel_weight(o_dot_h, mode);
  return (f0.array() + (Real(1) - f0.array()) * w).matrix();
}

template <typename Real>
Real ggx_g1(Real z, Real r) {
  const Real r2 = r * r;
  return Real(2) * z / (z + std::sqrt(r2 + (Real(1) - r2) * z * z));
}

template <typename Real>
Real dggx_g1_dr(Real z, Real r) {
  const Real r2 = r * r;
  const Real s = std::sqrt(r2 + (Real(1) - r2) * z * z);
  const Real denom = z + s;
  return Real(-2) * z / (denom * denom) * (r * (Real(1) - z * z) / s);
}

template <typename Real>
Real geometry_ggx(Real i_dot_n, Real o_dot_n, Real r) {
  return ggx_g1(i_dot_n, r) * ggx_g1(o_dot_n, r);
}

// The four dot products the BRDF depends on. `half_valid` is false when wi and wo are opposed.
template <typename Real>
struct ShadingCosines {
  Real i_dot_n = Real(0);
  Real o_dot_n = Real(0);
  Real h_dot_n = Real(0);
  Real o_dot_h = Real(0);
  bool half_valid = true;
};

template <typename Real>
struct ShadingVectors {
  Vec3T<Real> wo;
  Vec3T<Real> wi;
  Vec3T<Real> n;

  ShadingCosines<Real> cosines() const {
    ShadingCosines<Real> c;
    c.i_dot_n = wi.dot(n);
    c.o_dot_n = wo.dot(n);
    const Vec3T<Real> sum = wi + wo;
    const Real len = sum.norm();
    if (!(len > Real(1e-8))) {
      c.half_valid = false;
      return c;
    }
    const Vec3T<Real> h = sum / len;
    c.h_dot_n = h.dot(n);
    c.o_dot_h = std::clamp(wo.dot(h), Real(0), Real(1));
    return c;
  }
};

// BRDF value and its partials. Channel c of the value depends on base_color only through
// channel c, so the base-color Jacobian is diagonal and stored as a spectrum.
template <typename Real>
struct BrdfSample {
  SpectrumT<Real> value = SpectrumT<Real>::Zero();
  SpectrumT<Real> d_base_color = SpectrumT<Real>::Zero();
  SpectrumT<Real> d_roughness = SpectrumT<Real>::Zero();
  SpectrumT<Real> d_metallic = SpectrumT<Real>::Zero();
};

template <typename Real>
BrdfSample<Real> eval_brdf_partials(const ShadingCosines<Real>& c, const BrdfParamsT<Real>& p,
                                    const BrdfOptions& opts = {}) {
  BrdfSample<Real> out;
  if (!(c.i_dot_n > Real(0))) return out;

  const Real m = p.metallic;
  const Real r = p.roughness;
  const SpectrumT<Real>& b = p.base_color;
  const Real kd = (Real(1) - m) / Real(kPi);
  out.value = b * kd;
  out.d_base_color.setConstant(kd);
  out.d_metallic = -b / Real(kPi);

  if (!opts.specular || !c.half_valid) return out;

  const Real ci = std::max(c.i_dot_n, Real(kCosEpsilon));
  const Real co = std::max(c.o_dot_n, Real(kCosEpsilon));
  const Real inv_den = Real(1) / (ci * co);

  const Real d = ndf_sg(c.h_dot_n, r);
  const Real dd = dndf_sg_dr(c.h_dot_n, r);
  const Real gi = ggx_g1(ci, r);
  const Real go = ggx_g1(co, r);
  const Real g = gi * go;
  const Real dg = dggx_g1_dr(ci, r) * go + gi * dggx_g1_dr(co, r);

  const Real w = fresnel_weight(c.o_dot_h, opts.fresnel);
  const SpectrumT<Real> f0 = fresnel_f0(b, m);
  const SpectrumT<Real> f = (f0.array() + (Real(1) - f0.array()) * w).matrix();

  const Real dg_over = d * g * inv_den;
  out.value += f * dg_over;
  out.d_roughness = f * ((dd * g + d * dg) * inv_den);
  // dF/dF0 = 1 - w; dF0/db = m; dF0/dm = b - 0.04.
  out.d_base_color.array() += dg_over * (Real(1) - w) * m;
  out.d_metallic.array() += dg_over * (Real(1) - w) * (b.array() - Real(kDielectricF0));
  return out;
}

template <typename Real>
SpectrumT<Real> eval_brdf(const ShadingVectors<Real>& v, const BrdfParamsT<Real>& p,
                          const BrdfOptions& opts = {}) {
  return eval_brdf_partials(v.cosines(), p, opts).value;
}

}  // namespace neilf
