#include "neilf/render.hpp"

#include <cmath>
#include <sstream>

namespace neilf {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, const PixelId& px) {
  std::uint64_t h = seed ^ 0x243F6A8885A308D3ULL;
  for (std::uint64_t v : {static_cast<std::uint64_t>(px.view), static_cast<std::uint64_t>(px.row),
                          static_cast<std::uint64_t>(px.col)}) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    h *= 0xBF58476D1CE4E5B9ULL;
  }
  return h;
}

}  // namespace

DirectionSet sample_directions(const SurfacePoint& pt, const RenderOptions& opts) {
  const TangentFrame frame = build_tangent_frame(pt.n);
  if (opts.sampler == SamplerKind::kFibonacci) return fibonacci_hemisphere(opts.samples, frame);
  return random_hemisphere(opts.samples, frame, mix_seed(opts.seed, pt.pixel));
}

template <typename Real>
std::shared_ptr<const SampleGeometry<Real>> build_sample_geometry(std::span<const SurfacePoint> points,
                                                                  const RenderOptions& opts) {
  if (opts.samples < 1) fail(Error::Kind::kInvalidArgument, "render: sample count must be >= 1");
  auto geom = std::make_shared<SampleGeometry<Real>>();
  const int n_points = static_cast<int>(points.size());
  const int s = opts.samples;
  geom->points = n_points;
  geom->samples = s;
  geom->solid_angle = static_cast<Real>(kTwoPi / s);
  geom->positions.resize(static_cast<Eigen::Index>(n_points) * s, 3);
  geom->dirs.resize(static_cast<Eigen::Index>(n_points) * s, 3);
  geom->cosines.resize(static_cast<std::size_t>(n_points) * s);

  // The Fibonacci lattice is shared; only the frame changes per point.
  std::vector<Vec3> lattice;
  if (opts.sampler == SamplerKind::kFibonacci) lattice = fibonacci_hemisphere_local(s);

  for (int p = 0; p < n_points; ++p) {
    const SurfacePoint& pt = points[static_cast<std::size_t>(p)];
    DirectionSet set;
    if (opts.sampler == SamplerKind::kFibonacci) {
      const TangentFrame frame = build_tangent_frame(pt.n);
      set.directions.reserve(lattice.size());
      for (const Vec3& l : lattice) set.directions.push_back(frame.to_world(l));
    } else {
      set = sample_directions(pt, opts);
    }
    for (int k = 0; k < s; ++k) {
      const Eigen::Index row = static_cast<Eigen::Index>(p) * s + k;
      const Vec3& wi = set.directions[static_cast<std::size_t>(k)];
      geom->positions.row(row) = pt.x.cast<Real>().transpose();
      geom->dirs.row(row) = wi.cast<Real>().transpose();
      ShadingVectors<double> sv{pt.wo, wi, pt.n};
      const ShadingCosines<double> c = sv.cosines();
      ShadingCosines<Real>& out = geom->cosines[static_cast<std::size_t>(row)];
      out.i_dot_n = static_cast<Real>(c.i_dot_n);
      out.o_dot_n = static_cast<Real>(c.o_dot_n);
      out.h_dot_n = static_cast<Real>(c.h_dot_n);
      out.o_dot_h = static_cast<Real>(c.o_dot_h);
      out.half_valid = c.half_valid;
    }
  }
  return geom;
}

namespace {

template <typename Real>
BrdfParamsT<Real> material_row(const Matrix<Real>& m, Eigen::Index p) {
  BrdfParamsT<Real> out;
  out.base_color = SpectrumT<Real>(m(p, kBaseColorCol), m(p, kBaseColorCol + 1), m(p, kBaseColorCol + 2));
  out.roughness = m(p, kRoughnessCol);
  out.metallic = m(p, kMetallicCol);
  return out;
}

}  // namespace

template <typename Real>
Var render_radiance(Tape<Real>& tape, Var brdf, Var light, std::shared_ptr<const SampleGeometry<Real>> geom,
                    const BrdfOptions& opts) {
  const Matrix<Real>& mat = tape.value(brdf);
  const Matrix<Real>& li = tape.value(light);
  const int n_points = geom->points;
  const int s = geom->samples;
  if (mat.rows() != n_points || mat.cols() != kBrdfChannels) fail(Error::Kind::kInternal, "render: material shape mismatch");
  if (li.rows() != static_cast<Eigen::Index>(n_points) * s || li.cols() != 3) {
    fail(Error::Kind::kInternal, "render: lighting shape mismatch");
  }
  Matrix<Real> out = Matrix<Real>::Zero(n_points, 3);
  for (int p = 0; p < n_points; ++p) {
    const BrdfParamsT<Real> params = material_row(mat, p);
    SpectrumT<Real> acc = SpectrumT<Real>::Zero();
    for (int k = 0; k < s; ++k) {
      const Eigen::Index row = static_cast<Eigen::Index>(p) * s + k;
      const ShadingCosines<Real>& c = geom->cosines[static_cast<std::size_t>(row)];
      const SpectrumT<Real> f = eval_brdf_partials(c, params, opts).value;
      const SpectrumT<Real> term = (f.array() * li.row(row).transpose().array()).matrix() * c.i_dot_n;
      if (!term.allFinite()) {
        std::ostringstream msg;
        msg << "render: non-finite term at point " << p << ", direction " << k << " (light " << li.row(row)
            << ", brdf " << f.transpose() << ")";
        fail(Error::Kind::kNumerical, msg.str());
      }
      acc += term;
    }
    out.row(p) = (acc * geom->solid_angle).transpose();
  }
  return tape.record(std::move(out), {brdf, light}, [brdf, light, geom, opts](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    const Matrix<Real>& mat_v = t.value(brdf);
    const Matrix<Real>& li_v = t.value(light);
    const bool need_light = t.requires_grad(light);
    const bool need_brdf = t.requires_grad(brdf);
    Matrix<Real>* g_light = need_light ? &t.grad_ref(light.id) : nullptr;
    Matrix<Real>* g_brdf = need_brdf ? &t.grad_ref(brdf.id) : nullptr;
    const Real a = geom->solid_angle;
    for (int p = 0; p < geom->points; ++p) {
      const BrdfParamsT<Real> params = material_row(mat_v, p);
      const SpectrumT<Real> gp = g.row(p).transpose() * a;
      SpectrumT<Real> g_base = SpectrumT<Real>::Zero();
      Real g_rough = Real(0);
      Real g_metal = Real(0);
      for (int k = 0; k < geom->samples; ++k) {
        const Eigen::Index row = static_cast<Eigen::Index>(p) * geom->samples + k;
        const ShadingCosines<Real>& c = geom->cosines[static_cast<std::size_t>(row)];
        const BrdfSample<Real> f = eval_brdf_partials(c, params, opts);
        const SpectrumT<Real> gpc = gp * c.i_dot_n;
        if (g_light) g_light->row(row) += (gpc.array() * f.value.array()).matrix().transpose();
        if (g_brdf) {
          const SpectrumT<Real> w = (gpc.array() * li_v.row(row).transpose().array()).matrix();
          g_base += (w.array() * f.d_base_color.array()).matrix();
          g_rough += w.dot(f.d_roughness);
          g_metal += w.dot(f.d_metallic);
        }
      }
      if (g_brdf) {
        for (int ch = 0; ch < 3; ++ch) (*g_brdf)(p, kBaseColorCol + ch) += g_base(ch);
        (*g_brdf)(p, kRoughnessCol) += g_rough;
        (*g_brdf)(p, kMetallicCol) += g_metal;
      }
    }
  });
}

template <typename Real>
SpectrumT<Real> tonemap(const SpectrumT<Real>& hdr, Real gamma) {
  SpectrumT<Real> out;
  for (int c = 0; c < 3; ++c) {
    out(c) = std::clamp(std::pow(std::max(hdr(c), Real(kToneFloor)), gamma), Real(0), Real(1));
  }
  return out;
}

template <typename Real>
Var tonemap(Tape<Real>& tape, Var hdr, Var log_gamma) {
  const Matrix<Real>& h = tape.value(hdr);
  const Real gamma = std::exp(tape.value(log_gamma)(0, 0));
  Matrix<Real> out(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    out.data()[i] = std::clamp(std::pow(std::max(h.data()[i], Real(kToneFloor)), gamma), Real(0), Real(1));
  }
  return tape.record(std::move(out), {hdr, log_gamma}, [hdr, log_gamma](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    const Matrix<Real>& hv = t.value(hdr);
    const Real gam = std::exp(t.value(log_gamma)(0, 0));
    const bool need_h = t.requires_grad(hdr);
    const bool need_g = t.requires_grad(log_gamma);
    Real g_log_gamma = Real(0);
    for (Eigen::Index i = 0; i < hv.size(); ++i) {
      const Real x = hv.data()[i];
      if (x < Real(kToneFloor)) continue;
      const Real y = std::pow(x, gam);
      if (y > Real(1)) continue;
      const Real gi = g.data()[i];
      if (need_h) t.grad_ref(hdr.id).data()[i] += gi * gam * std::pow(x, gam - Real(1));
      if (need_g) g_log_gamma += gi * y * std::log(x) * gam;
    }
    if (need_g) t.grad_ref(log_gamma.id)(0, 0) += g_log_gamma;
  });
}

template <typename Real>
RenderedPoints<Real> render_points(Tape<Real>& tape, const Model<Real>& model, std::span<const SurfacePoint> points,
                                   const RenderOptions& opts, bool apply_tonemap, bool spatial_gradients) {
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Matrix<Real> pos(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) pos.row(i) = points[static_cast<std::size_t>(i)].x.cast<Real>().transpose();

  RenderedPoints<Real> out;
  out.brdf = model.brdf.eval(tape, tape.constant(std::move(pos)), spatial_gradients);
  auto geom = build_sample_geometry<Real>(points, opts);
  Var light = model.lighting.eval(tape, geom->positions, geom->dirs);
  out.hdr = render_radiance(tape, out.brdf.params, light, geom, opts.brdf);
  out.output = out.hdr;
  if (apply_tonemap) {
    auto& lg = const_cast<ParamTensor<Real>&>(model.log_gamma);
    Var log_gamma = model.gamma_trainable ? tape.param(lg) : tape.constant(lg.values);
    out.output = tonemap(tape, out.hdr, log_gamma);
  }
  return out;
}

template <typename Real>
SpectrumT<Real> render_point(const SurfacePoint& pt, const Model<Real>& model, const RenderOptions& opts) {
  Tape<Real> tape;
  const auto r = render_points(tape, model, std::span<const SurfacePoint>(&pt, 1), opts, false, false);
  const Matrix<Real>& v = tape.value(r.hdr);
  return SpectrumT<Real>(v(0, 0), v(0, 1), v(0, 2));
}

Spectrum render_point(const SurfacePoint& pt, const LightingFn& lighting, const BrdfParams& material,
                      const RenderOptions& opts) {
  const DirectionSet set = sample_directions(pt, opts);
  Spectrum acc = Spectrum::Zero();
  for (std::size_t k = 0; k < set.size(); ++k) {
    const Vec3& wi = set.directions[k];
    const Spectrum f = eval_brdf(ShadingVectors<double>{pt.wo, wi, pt.n}, material, opts.brdf);
    const Spectrum li = lighting(pt.x, wi);
    const Spectrum term = (f.array() * li.array()).matrix() * wi.dot(pt.n);
    if (!term.allFinite()) {
      fail(Error::Kind::kNumerical, "render: non-finite term at direction " + std::to_string(k));
    }
    acc += term;
  }
  return acc * set.solid_angle;
}

#define NEILF_INSTANTIATE_RENDER(Real)                                                                         \
  template std::shared_ptr<const SampleGeometry<Real>> build_sample_geometry<Real>(std::span<const SurfacePoint>, \
                                                                                   const RenderOptions&);         \
  template Var render_radiance<Real>(Tape<Real>&, Var, Var, std::shared_ptr<const SampleGeometry<Real>>,          \
                                     const BrdfOptions&);                                                         \
  template Var tonemap<Real>(Tape<Real>&, Var, Var);                                                              \
  template SpectrumT<Real> tonemap<Real>(const SpectrumT<Real>&, Real);                                           \
  template RenderedPoints<Real> render_points<Real>(Tape<Real>&, const Model<Real>&,                              \
                                                    std::span<const SurfacePoint>, const RenderOptions&, bool,    \
                                                    bool);                                                        \
  template SpectrumT<Real> render_point<Real>(const SurfacePoint&, const Model<Real>&, const RenderOptions&);

NEILF_INSTANTIATE_RENDER(float)
NEILF_INSTANTIATE_RENDER(double)

}  // namespace neilf
