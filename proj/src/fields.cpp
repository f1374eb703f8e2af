#include "neilf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace neilf {

LightingKind parse_lighting_kind(std::string_view name) {
  if (name == "neilf") return LightingKind::kNeilf;
  if (name == "ne_env" || name == "ne-env") return LightingKind::kNeEnv;
  if (name == "pix_env" || name == "pix-env") return LightingKind::kPixEnv;
  fail(Error::Kind::kInvalidArgument, "unknown lighting kind '" + std::string(name) + "' (expected neilf|ne_env|pix_env)");
}

std::string_view to_string(LightingKind kind) {
  switch (kind) {
    case LightingKind::kNeilf: return "neilf";
    case LightingKind::kNeEnv: return "ne_env";
    case LightingKind::kPixEnv: return "pix_env";
  }
  return "?";
}

void FieldConfig::validate() const {
  if (hidden_layers < 1) fail(Error::Kind::kInvalidArgument, "field config: hidden_layers must be >= 1");
  if (width < 1) fail(Error::Kind::kInvalidArgument, "field config: width must be >= 1");
  if (skip_at >= hidden_layers) fail(Error::Kind::kInvalidArgument, "field config: skip_at must be < hidden_layers");
  if (pe_frequencies < 0 || dir_pe_frequencies < 0) {
    fail(Error::Kind::kInvalidArgument, "field config: encoding frequencies must be >= 0");
  }
  if (!(omega0 > 0.0f) || !std::isfinite(omega0)) fail(Error::Kind::kInvalidArgument, "field config: omega0 must be > 0");
}

// ---------------------------------------------------------------------------------------------
// SirenMlp

template <typename Real>
SirenMlp<Real>::SirenMlp(const std::string& name, const FieldConfig& cfg, int input_width, int output_width)
    : cfg_(cfg), input_width_(input_width), output_width_(output_width) {
  cfg_.validate();
  int in = input_width;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    if (l > 0 && l == cfg.skip_at) in += input_width;
    weights_.emplace_back(name + ".w" + std::to_string(l), cfg.width, in);
    biases_.emplace_back(name + ".b" + std::to_string(l), 1, cfg.width);
    in = cfg.width;
  }
  weights_.emplace_back(name + ".w_out", output_width, in);
  biases_.emplace_back(name + ".b_out", 1, output_width);
}

template <typename Real>
void SirenMlp<Real>::initialize(Rng& rng) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double fan_in = static_cast<double>(weights_[l].cols());
    const double bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / cfg_.omega0;
    for (Eigen::Index k = 0; k < weights_[l].size(); ++k) {
      weights_[l].values.data()[k] = static_cast<Real>(rng.uniform(-bound, bound));
    }
    for (Eigen::Index k = 0; k < biases_[l].size(); ++k) {
      biases_[l].values.data()[k] = static_cast<Real>(rng.uniform(-bound, bound));
    }
    weights_[l].zero_grad();
    biases_[l].zero_grad();
  }
}

template <typename Real>
Var SirenMlp<Real>::forward(Tape<Real>& tape, Var encoded) const {
  if (tape.value(encoded).cols() != input_width_) {
    fail(Error::Kind::kInternal, "siren: expected input width " + std::to_string(input_width_) + ", got " +
                                     std::to_string(tape.value(encoded).cols()));
  }
  auto& self = const_cast<SirenMlp&>(*this);
  const Real omega = static_cast<Real>(cfg_.omega0);
  Var a = encoded;
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    if (l > 0 && l == cfg_.skip_at) a = ad::concat_cols(tape, {a, encoded});
    Var z = ad::linear(tape, a, tape.param(self.weights_[l]), tape.param(self.biases_[l]));
    a = ad::sin(tape, ad::scale(tape, z, omega));
  }
  return ad::linear(tape, a, tape.param(self.weights_.back()), tape.param(self.biases_.back()));
}

template <typename Real>
typename SirenMlp<Real>::Jet SirenMlp<Real>::forward_with_tangents(
    Tape<Real>& tape, Var encoded, const std::array<Matrix<Real>, 3>& encoded_tangents) const {
  auto& self = const_cast<SirenMlp&>(*this);
  const Real omega = static_cast<Real>(cfg_.omega0);
  std::array<Var, 3> enc_t;
  for (int d = 0; d < 3; ++d) enc_t[d] = tape.constant(encoded_tangents[d]);

  Var a = encoded;
  std::array<Var, 3> t = enc_t;
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    if (l > 0 && l == cfg_.skip_at) {
      a = ad::concat_cols(tape, {a, encoded});
      for (int d = 0; d < 3; ++d) t[d] = ad::concat_cols(tape, {t[d], enc_t[d]});
    }
    Var w = tape.param(self.weights_[l]);
    Var pre = ad::scale(tape, ad::linear(tape, a, w, tape.param(self.biases_[l])), omega);
    Var c = ad::cos(tape, pre);
    a = ad::sin(tape, pre);
    for (int d = 0; d < 3; ++d) t[d] = ad::mul(tape, c, ad::scale(tape, ad::linear(tape, t[d], w), omega));
  }
  Var w_out = tape.param(self.weights_.back());
  Jet jet;
  jet.value = ad::linear(tape, a, w_out, tape.param(self.biases_.back()));
  for (int d = 0; d < 3; ++d) jet.tangents[d] = ad::linear(tape, t[d], w_out);
  return jet;
}

template <typename Real>
std::vector<Matrix<Real>> SirenMlp<Real>::pre_activations(const Matrix<Real>& encoded) const {
  std::vector<Matrix<Real>> out;
  const Real omega = static_cast<Real>(cfg_.omega0);
  Matrix<Real> a = encoded;
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    if (l > 0 && l == cfg_.skip_at) {
      Matrix<Real> cat(a.rows(), a.cols() + encoded.cols());
      cat << a, encoded;
      a = std::move(cat);
    }
    Matrix<Real> z = (a * weights_[l].values.transpose()).rowwise() + biases_[l].values.row(0);
    z *= omega;
    a = z.array().sin().matrix();
    out.push_back(std::move(z));
  }
  return out;
}

template <typename Real>
std::vector<ParamTensor<Real>*> SirenMlp<Real>::parameters() {
  std::vector<ParamTensor<Real>*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

template <typename Real>
std::vector<const ParamTensor<Real>*> SirenMlp<Real>::parameters() const {
  std::vector<const ParamTensor<Real>*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// BRDF squash and spatial gradients

namespace {

template <typename Real>
Real logistic(Real z) {
  return Real(1) / (Real(1) + std::exp(-z));
}

}  // namespace

template <typename Real>
Var brdf_squash(Tape<Real>& tape, Var logits) {
  const Matrix<Real>& z = tape.value(logits);
  if (z.cols() != kBrdfChannels) fail(Error::Kind::kInternal, "brdf_squash: expected 5 logit columns");
  const Real r_span = Real(1) - Real(kRoughnessMin);
  Matrix<Real> out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (int c = 0; c < kBrdfChannels; ++c) {
      const Real s = logistic(z(i, c));
      out(i, c) = c == kRoughnessCol ? Real(kRoughnessMin) + r_span * s : s;
    }
  }
  return tape.record(std::move(out), {logits}, [logits, r_span](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    const Matrix<Real>& zz = t.value(logits);
    Matrix<Real>& gz = t.grad_ref(logits.id);
    for (Eigen::Index i = 0; i < zz.rows(); ++i) {
      for (int c = 0; c < kBrdfChannels; ++c) {
        const Real s = logistic(zz(i, c));
        const Real ds = s * (Real(1) - s);
        gz(i, c) += g(i, c) * (c == kRoughnessCol ? r_span * ds : ds);
      }
    }
  });
}

template <typename Real>
Var brdf_spatial_gradients(Tape<Real>& tape, Var logits, const std::array<Var, 3>& tangents) {
  const Matrix<Real>& z = tape.value(logits);
  const Real r_span = Real(1) - Real(kRoughnessMin);
  Matrix<Real> out(z.rows(), 6);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Real sr = logistic(z(i, kRoughnessCol));
    const Real sm = logistic(z(i, kMetallicCol));
    const Real dr = r_span * sr * (Real(1) - sr);
    const Real dm = sm * (Real(1) - sm);
    for (int d = 0; d < 3; ++d) {
      out(i, d) = dr * tape.value(tangents[d])(i, kRoughnessCol);
      out(i, 3 + d) = dm * tape.value(tangents[d])(i, kMetallicCol);
    }
  }
  return tape.record(
      std::move(out), {logits, tangents[0], tangents[1], tangents[2]},
      [logits, tangents, r_span](Tape<Real>& t, int self) {
        const Matrix<Real>& g = t.grad_ref(self);
        const Matrix<Real>& zz = t.value(logits);
        const bool need_z = t.requires_grad(logits);
        for (Eigen::Index i = 0; i < zz.rows(); ++i) {
          const Real sr = logistic(zz(i, kRoughnessCol));
          const Real sm = logistic(zz(i, kMetallicCol));
          const Real d1r = sr * (Real(1) - sr);
          const Real d1m = sm * (Real(1) - sm);
          const Real d2r = d1r * (Real(1) - Real(2) * sr);
          const Real d2m = d1m * (Real(1) - Real(2) * sm);
          for (int d = 0; d < 3; ++d) {
            const Real tr = t.value(tangents[d])(i, kRoughnessCol);
            const Real tm = t.value(tangents[d])(i, kMetallicCol);
            const Real gr = g(i, d);
            const Real gm = g(i, 3 + d);
            if (need_z) {
              Matrix<Real>& gz = t.grad_ref(logits.id);
              gz(i, kRoughnessCol) += gr * r_span * d2r * tr;
              gz(i, kMetallicCol) += gm * d2m * tm;
            }
            if (t.requires_grad(tangents[d])) {
              Matrix<Real>& gt = t.grad_ref(tangents[d].id);
              gt(i, kRoughnessCol) += gr * r_span * d1r;
              gt(i, kMetallicCol) += gm * d1m;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------------------------
// BrdfField

template <typename Real>
BrdfField<Real>::BrdfField(const FieldConfig& cfg)
    : mlp_("brdf", cfg, ad::encoded_width(3, cfg.pe_frequencies), kBrdfChannels) {}

template <typename Real>
BrdfFieldOutput<Real> BrdfField<Real>::eval(Tape<Real>& tape, Var positions, bool with_spatial_gradients) const {
  const int freqs = mlp_.config().pe_frequencies;
  Var encoded = ad::positional_encoding(tape, positions, freqs);
  BrdfFieldOutput<Real> out;
  if (!with_spatial_gradients) {
    out.params = brdf_squash(tape, mlp_.forward(tape, encoded));
    return out;
  }
  const Matrix<Real>& x = tape.value(positions);
  std::array<Matrix<Real>, 3> enc_t;
  for (int d = 0; d < 3; ++d) enc_t[d] = ad::encode_positions_tangent(x, freqs, d);
  auto jet = mlp_.forward_with_tangents(tape, encoded, enc_t);
  out.params = brdf_squash(tape, jet.value);
  out.spatial = brdf_spatial_gradients(tape, jet.value, jet.tangents);
  return out;
}

template <typename Real>
BrdfParamsT<Real> BrdfField<Real>::eval_point(const Vec3T<Real>& x) const {
  Tape<Real> tape;
  Matrix<Real> pos(1, 3);
  pos.row(0) = x.transpose();
  const Matrix<Real>& v = tape.value(eval(tape, tape.constant(pos), false).params);
  BrdfParamsT<Real> p;
  p.base_color = Vec3T<Real>(v(0, 0), v(0, 1), v(0, 2));
  p.roughness = v(0, kRoughnessCol);
  p.metallic = v(0, kMetallicCol);
  return p;
}

// ---------------------------------------------------------------------------------------------
// Environment grid

Vec3 latlong_direction(double u, double v) {
  const double az = kTwoPi * u;
  const double pol = kPi * v;
  return Vec3(std::sin(pol) * std::cos(az), std::sin(pol) * std::sin(az), std::cos(pol));
}

void direction_to_latlong(const Vec3& d, double& azimuth, double& polar) {
  azimuth = std::atan2(d.y(), d.x());
  if (azimuth < 0.0) azimuth += kTwoPi;
  polar = std::acos(std::clamp(d.z(), -1.0, 1.0));
}

EnvTap env_bilinear_taps(const Vec3& dir, int width, int height) {
  double az = 0.0;
  double pol = 0.0;
  direction_to_latlong(dir, az, pol);
  const double u = az / kTwoPi * width - 0.5;
  const double v = pol / kPi * height - 0.5;
  const double cu = std::floor(u);
  const double cv = std::floor(v);
  const double fu = u - cu;
  const double fv = v - cv;
  const int c0 = ((static_cast<int>(cu) % width) + width) % width;
  const int c1 = (c0 + 1) % width;
  const int r0 = std::clamp(static_cast<int>(cv), 0, height - 1);
  const int r1 = std::clamp(static_cast<int>(cv) + 1, 0, height - 1);
  EnvTap tap;
  tap.index = {r0 * width + c0, r0 * width + c1, r1 * width + c0, r1 * width + c1};
  tap.weight = {(1.0 - fu) * (1.0 - fv), fu * (1.0 - fv), (1.0 - fu) * fv, fu * fv};
  return tap;
}

template <typename Real>
Var env_lookup(Tape<Real>& tape, Var grid, const Matrix<Real>& dirs, int width, int height) {
  const Matrix<Real>& gv = tape.value(grid);
  if (gv.rows() != width * height || gv.cols() != 3) fail(Error::Kind::kInternal, "env_lookup: grid shape mismatch");
  auto taps = std::make_shared<std::vector<EnvTap>>(static_cast<std::size_t>(dirs.rows()));
  Matrix<Real> out = Matrix<Real>::Zero(dirs.rows(), 3);
  for (Eigen::Index i = 0; i < dirs.rows(); ++i) {
    const Vec3 d(static_cast<double>(dirs(i, 0)), static_cast<double>(dirs(i, 1)), static_cast<double>(dirs(i, 2)));
    EnvTap& tap = (*taps)[static_cast<std::size_t>(i)];
    tap = env_bilinear_taps(d, width, height);
    for (int k = 0; k < 4; ++k) out.row(i) += static_cast<Real>(tap.weight[k]) * gv.row(tap.index[k]);
  }
  return tape.record(std::move(out), {grid}, [grid, taps](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    Matrix<Real>& gg = t.grad_ref(grid.id);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const EnvTap& tap = (*taps)[static_cast<std::size_t>(i)];
      for (int k = 0; k < 4; ++k) gg.row(tap.index[k]) += static_cast<Real>(tap.weight[k]) * g.row(i);
    }
  });
}

// ---------------------------------------------------------------------------------------------
// LightingModel

template <typename Real>
LightingModel<Real>::LightingModel(LightingKind kind, const FieldConfig& cfg) : kind_(kind), cfg_(cfg) {
  const int pos_width = ad::encoded_width(3, cfg.pe_frequencies);
  const int dir_width = ad::encoded_width(3, cfg.dir_pe_frequencies);
  switch (kind) {
    case LightingKind::kNeilf: mlp_ = SirenMlp<Real>("neilf", cfg, pos_width + dir_width, 3); break;
    case LightingKind::kNeEnv: mlp_ = SirenMlp<Real>("ne_env", cfg, dir_width, 3); break;
    case LightingKind::kPixEnv: env_ = ParamTensor<Real>("pix_env", kEnvWidth * kEnvHeight, 3); break;
  }
}

template <typename Real>
void LightingModel<Real>::initialize(Rng& rng, Real env_init) {
  if (kind_ == LightingKind::kPixEnv) {
    env_.values.setConstant(env_init);
    env_.zero_grad();
    return;
  }
  mlp_.initialize(rng);
}

template <typename Real>
Var LightingModel<Real>::eval(Tape<Real>& tape, Var positions, Var dirs) const {
  switch (kind_) {
    case LightingKind::kNeilf: {
      Var enc = ad::concat_cols(tape, {ad::positional_encoding(tape, positions, cfg_.pe_frequencies),
                                       ad::positional_encoding(tape, dirs, cfg_.dir_pe_frequencies)});
      return ad::exp(tape, mlp_.forward(tape, enc));
    }
    case LightingKind::kNeEnv: {
      Var enc = ad::positional_encoding(tape, dirs, cfg_.dir_pe_frequencies);
      return ad::exp(tape, mlp_.forward(tape, enc));
    }
    case LightingKind::kPixEnv: {
      auto& self = const_cast<LightingModel&>(*this);
      // Record the grid leaf first: it may grow the tape and move the node holding `dirs`.
      Var grid = tape.param(self.env_);
      const Matrix<Real> d = tape.value(dirs);
      return env_lookup(tape, grid, d);
    }
  }
  fail(Error::Kind::kInternal, "lighting: unknown kind");
}

template <typename Real>
Var LightingModel<Real>::eval(Tape<Real>& tape, const Matrix<Real>& positions, const Matrix<Real>& dirs) const {
  // Ne-Env and the grid never read positions; keep them off the tape entirely.
  Var pos = kind_ == LightingKind::kNeilf ? tape.constant(positions) : Var{};
  return eval(tape, pos, tape.constant(dirs));
}

template <typename Real>
SpectrumT<Real> LightingModel<Real>::eval_point(const Vec3T<Real>& x, const Vec3T<Real>& dir) const {
  Tape<Real> tape;
  Matrix<Real> pos(1, 3);
  Matrix<Real> d(1, 3);
  pos.row(0) = x.transpose();
  d.row(0) = dir.transpose();
  const Matrix<Real>& v = tape.value(eval(tape, pos, d));
  return SpectrumT<Real>(v(0, 0), v(0, 1), v(0, 2));
}

template <typename Real>
std::vector<ParamTensor<Real>*> LightingModel<Real>::parameters() {
  if (kind_ == LightingKind::kPixEnv) return {&env_};
  return mlp_.parameters();
}

template <typename Real>
std::vector<const ParamTensor<Real>*> LightingModel<Real>::parameters() const {
  if (kind_ == LightingKind::kPixEnv) return {&env_};
  return mlp_.parameters();
}

template <typename Real>
void LightingModel<Real>::project() {
  if (kind_ == LightingKind::kPixEnv) env_.values = env_.values.cwiseMax(Real(0));
}

#define NEILF_INSTANTIATE_FIELDS(Real)                                                               \
  template class SirenMlp<Real>;                                                                     \
  template class BrdfField<Real>;                                                                    \
  template class LightingModel<Real>;                                                                \
  template Var brdf_squash<Real>(Tape<Real>&, Var);                                                  \
  template Var brdf_spatial_gradients<Real>(Tape<Real>&, Var, const std::array<Var, 3>&);            \
  template Var env_lookup<Real>(Tape<Real>&, Var, const Matrix<Real>&, int, int);

NEILF_INSTANTIATE_FIELDS(float)
NEILF_INSTANTIATE_FIELDS(double)

}  // namespace neilf
