#pragma once

// Discretized rendering integral over a hemisphere direction set,
//   L_o(w_o, x) = (2 pi / N) sum_k f(w_o, w_k, x) L_i(w_k, x) (w_k . n),
// and the learnable power-law tone curve applied to LDR data.

#include "neilf/brdf.hpp"
#include "neilf/model.hpp"
#include "neilf/sampling.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace neilf {

struct PixelId {
  int view = 0;
  int row = 0;
  int col = 0;
};

struct SurfacePoint {
  Vec3 x;   // normalized scene coordinates
  Vec3 n;   // unit normal
  Vec3 wo;  // unit direction toward the camera
  PixelId pixel;
};

struct RenderOptions {
  SamplerKind sampler = SamplerKind::kFibonacci;
  int samples = 128;
  BrdfOptions brdf;
  // Seeds the random sampler; combined with each point's pixel id.
  std::uint64_t seed = 0;
};

// Lower clamp on HDR radiance before the power curve.
inline constexpr double kToneFloor = 1e-6;

// Direction set used for one surface point.
DirectionSet sample_directions(const SurfacePoint& pt, const RenderOptions& opts);

// Per-(point, direction) inputs for a chunk of points. Row p * samples + k holds direction k of
// point p.
template <typename Real>
struct SampleGeometry {
  int points = 0;
  int samples = 0;
  Real solid_angle = Real(0);
  Matrix<Real> positions;
  Matrix<Real> dirs;
  std::vector<ShadingCosines<Real>> cosines;
};

template <typename Real>
std::shared_ptr<const SampleGeometry<Real>> build_sample_geometry(std::span<const SurfacePoint> points,
                                                                  const RenderOptions& opts);

// Fused quadrature: brdf [P, 5] squashed material, light [P*S, 3] incident radiance -> [P, 3].
// Throws Error(kNumerical) naming the point and direction when a term is non-finite.
template <typename Real>
Var render_radiance(Tape<Real>& tape, Var brdf, Var light, std::shared_ptr<const SampleGeometry<Real>> geom,
                    const BrdfOptions& opts);

// clamp(max(hdr, 1e-6)^exp(log_gamma), 0, 1) per channel. log_gamma is a 1x1 node.
template <typename Real>
Var tonemap(Tape<Real>& tape, Var hdr, Var log_gamma);

template <typename Real>
SpectrumT<Real> tonemap(const SpectrumT<Real>& hdr, Real gamma);

template <typename Real>
struct RenderedPoints {
  Var hdr;                      // [P, 3]
  Var output;                   // tone-mapped when requested, else hdr
  BrdfFieldOutput<Real> brdf;   // [P, 5] material (+ [P, 6] spatial gradients)
};

// Builds the whole differentiable forward pass for a chunk of surface points.
template <typename Real>
RenderedPoints<Real> render_points(Tape<Real>& tape, const Model<Real>& model, std::span<const SurfacePoint> points,
                                   const RenderOptions& opts, bool apply_tonemap, bool spatial_gradients);

// Single-point rendering with the learned fields.
template <typename Real>
SpectrumT<Real> render_point(const SurfacePoint& pt, const Model<Real>& model, const RenderOptions& opts);

// Reference quadrature with an arbitrary lighting function and a fixed material.
using LightingFn = std::function<Spectrum(const Vec3& x, const Vec3& dir)>;
Spectrum render_point(const SurfacePoint& pt, const LightingFn& lighting, const BrdfParams& material,
                      const RenderOptions& opts);

}  // namespace neilf
