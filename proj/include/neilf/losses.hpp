#pragma once

// Training objective: L1 image term, bilateral smoothness of roughness/metallic, Lambertian prior.
// The tape ops take the full batch size as `normalizer` so that a batch split into chunks sums to
// exactly the per-batch mean.

#include "neilf/render.hpp"

#include <span>
#include <vector>

namespace neilf {

struct PixelSample {
  SurfacePoint point;
  Spectrum observed = Spectrum::Zero();
  // |grad_p I(p)|, precomputed from the input image.
  double grad_magnitude = 0.0;
};

struct PixelBatch {
  std::vector<PixelSample> entries;

  std::size_t size() const { return entries.size(); }
};

struct LossWeights {
  double image = 1.0;
  double smooth = 1e-4;
  double lambertian = 1e-3;

  void validate() const;
};

struct LossTerms {
  double image = 0.0;
  double smooth = 0.0;
  double lambertian = 0.0;
  double total = 0.0;
};

// (1/N) sum_p sum_c |I_c(p) - L_c(p)|.
template <typename Real>
Var image_l1(Tape<Real>& tape, Var rendered, const Matrix<Real>& observed, Real normalizer);

// (1/N) sum_p (|grad r| + |grad m|) exp(-g_p); spatial is [n, 6], grad_magnitude is [n, 1].
template <typename Real>
Var smoothness_loss(Tape<Real>& tape, Var spatial, const Matrix<Real>& grad_magnitude, Real normalizer);

// (1/N) sum_p (|r - 1| + |m|) over the squashed material [n, 5].
template <typename Real>
Var lambertian_loss(Tape<Real>& tape, Var material, Real normalizer);

template <typename Real>
Var total_loss(Tape<Real>& tape, Var image, Var smooth, Var lambertian, const LossWeights& w);

// Scalar forms over a whole batch.
double image_l1(const PixelBatch& batch, std::span<const Spectrum> rendered);
double smoothness_loss(const PixelBatch& batch, std::span<const Vec3> grad_r, std::span<const Vec3> grad_m);
double lambertian_loss(const PixelBatch& batch, std::span<const BrdfParams> params);
// Throws Error(kNumerical) if a component is non-finite.
double total_loss(double image, double smooth, double lambertian, const LossWeights& w);

}  // namespace neilf
