#pragma once

// Trainable fields: the BRDF field x -> {b, r, m}, the incident light field {x, w} -> L, and the
// two environment-only baselines (direction-only MLP and a 32x16 lat-long radiance grid).

#include "neilf/autodiff.hpp"
#include "neilf/sampling.hpp"
#include "neilf/types.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace neilf {

using ad::Matrix;
using ad::ParamTensor;
using ad::Tape;
using ad::Var;

enum class OutputActivation { kBounded01, kExponential };

enum class LightingKind { kNeilf, kNeEnv, kPixEnv };

LightingKind parse_lighting_kind(std::string_view name);
std::string_view to_string(LightingKind kind);

struct FieldConfig {
  int hidden_layers = 8;
  int width = 512;
  // Hidden layer that receives the encoded input concatenated to its activations; -1 disables.
  int skip_at = 4;
  // Encoding frequencies for positions and for directions.
  int pe_frequencies = 6;
  int dir_pe_frequencies = 4;
  OutputActivation output_activation = OutputActivation::kBounded01;
  // Siren frequency scale applied inside every sine layer.
  float omega0 = 30.0f;

  void validate() const;
  bool operator==(const FieldConfig&) const = default;
};

// Sine-activated MLP: hidden layers sin(omega0 (W a + b)), a linear output layer producing logits.
template <typename Real>
class SirenMlp {
 public:
  struct Jet {
    Var value;
    std::array<Var, 3> tangents;
  };

  SirenMlp() = default;
  SirenMlp(const std::string& name, const FieldConfig& cfg, int input_width, int output_width);

  // Siren initialization: U(-1/in, 1/in) for the first layer, U(-sqrt(6/in)/omega0, ...) after.
  void initialize(Rng& rng);

  Var forward(Tape<Real>& tape, Var encoded) const;

  // Logits together with their derivatives along three input directions. `encoded_tangents[d]`
  // holds d(encoded)/d(x_d); tangents are propagated forward and stay differentiable with respect
  // to the weights, so a loss on them back-propagates second-order terms.
  Jet forward_with_tangents(Tape<Real>& tape, Var encoded, const std::array<Matrix<Real>, 3>& encoded_tangents) const;

  std::vector<ParamTensor<Real>*> parameters();
  std::vector<const ParamTensor<Real>*> parameters() const;

  const FieldConfig& config() const { return cfg_; }
  int input_width() const { return input_width_; }
  int output_width() const { return output_width_; }

  // Pre-activation omega0 (W a + b) per hidden layer for a given encoded input batch.
  std::vector<Matrix<Real>> pre_activations(const Matrix<Real>& encoded) const;

  template <typename Other>
  SirenMlp<Other> cast() const;

 private:
  template <typename>
  friend class SirenMlp;

  FieldConfig cfg_;
  int input_width_ = 0;
  int output_width_ = 0;
  // weights_[l] is [out, in]; biases_[l] is [1, out]. The last entry is the output layer.
  std::vector<ParamTensor<Real>> weights_;
  std::vector<ParamTensor<Real>> biases_;
};

// Column layout of the BRDF field output.
inline constexpr int kBaseColorCol = 0;
inline constexpr int kRoughnessCol = 3;
inline constexpr int kMetallicCol = 4;
inline constexpr int kBrdfChannels = 5;

// Logit squash: sigmoid for base color and metallic, r_min + (1 - r_min) sigmoid for roughness.
template <typename Real>
Var brdf_squash(Tape<Real>& tape, Var logits);

// Spatial gradients [dr/dx (3), dm/dx (3)] from the squashed outputs' logits and their tangents.
template <typename Real>
Var brdf_spatial_gradients(Tape<Real>& tape, Var logits, const std::array<Var, 3>& tangents);

template <typename Real>
struct BrdfFieldOutput {
  Var params;   // [n, 5] squashed material
  Var spatial;  // [n, 6] spatial gradients of r and m; invalid unless requested
};

template <typename Real>
class BrdfField {
 public:
  BrdfField() = default;
  explicit BrdfField(const FieldConfig& cfg);

  void initialize(Rng& rng) { mlp_.initialize(rng); }

  // `positions` must be a [n, 3] node in normalized scene coordinates.
  BrdfFieldOutput<Real> eval(Tape<Real>& tape, Var positions, bool with_spatial_gradients) const;

  BrdfParamsT<Real> eval_point(const Vec3T<Real>& x) const;

  SirenMlp<Real>& mlp() { return mlp_; }
  const SirenMlp<Real>& mlp() const { return mlp_; }
  const FieldConfig& config() const { return mlp_.config(); }

  template <typename Other>
  BrdfField<Other> cast() const {
    BrdfField<Other> out;
    out.mlp() = mlp_.template cast<Other>();
    return out;
  }

 private:
  SirenMlp<Real> mlp_;
};

template <typename Real>
template <typename Other>
SirenMlp<Other> SirenMlp<Real>::cast() const {
  SirenMlp<Other> out;
  out.cfg_ = cfg_;
  out.input_width_ = input_width_;
  out.output_width_ = output_width_;
  for (const auto& w : weights_) out.weights_.push_back(w.template cast<Other>());
  for (const auto& b : biases_) out.biases_.push_back(b.template cast<Other>());
  return out;
}

inline constexpr int kEnvWidth = 32;
inline constexpr int kEnvHeight = 16;

// Lat-long texel coordinates: azimuth atan2(y, x) in [0, 2 pi) across columns, polar acos(z) in
// [0, pi] down rows. Texel (row, col) is centred at ((col + 0.5) 2pi / W, (row + 0.5) pi / H).
Vec3 latlong_direction(double u, double v);
void direction_to_latlong(const Vec3& d, double& azimuth, double& polar);

// Bilinear lookup with azimuthal wraparound and polar clamping. `grid` is [H*W, 3] row-major by
// lat-long row.
template <typename Real>
Var env_lookup(Tape<Real>& tape, Var grid, const Matrix<Real>& dirs, int width = kEnvWidth, int height = kEnvHeight);

struct EnvTap {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};
EnvTap env_bilinear_taps(const Vec3& dir, int width, int height);

// Tagged lighting representation; all three evaluate to nonnegative radiance per row.
template <typename Real>
class LightingModel {
 public:
  LightingModel() = default;
  LightingModel(LightingKind kind, const FieldConfig& cfg);

  void initialize(Rng& rng, Real env_init = Real(1));

  // positions and dirs are [m, 3]. Ne-Env and the grid ignore positions entirely.
  Var eval(Tape<Real>& tape, Var positions, Var dirs) const;
  Var eval(Tape<Real>& tape, const Matrix<Real>& positions, const Matrix<Real>& dirs) const;

  SpectrumT<Real> eval_point(const Vec3T<Real>& x, const Vec3T<Real>& dir) const;

  LightingKind kind() const { return kind_; }
  const FieldConfig& config() const { return cfg_; }
  SirenMlp<Real>& mlp() { return mlp_; }
  const SirenMlp<Real>& mlp() const { return mlp_; }
  ParamTensor<Real>& env() { return env_; }
  const ParamTensor<Real>& env() const { return env_; }

  std::vector<ParamTensor<Real>*> parameters();
  std::vector<const ParamTensor<Real>*> parameters() const;

  // Clamps grid radiance at zero; no-op for the MLP variants.
  void project();

  template <typename Other>
  LightingModel<Other> cast() const {
    LightingModel<Other> out;
    out.kind_ = kind_;
    out.cfg_ = cfg_;
    out.mlp_ = mlp_.template cast<Other>();
    out.env_ = env_.template cast<Other>();
    return out;
  }

 private:
  template <typename>
  friend class LightingModel;

  LightingKind kind_ = LightingKind::kNeilf;
  FieldConfig cfg_;
  SirenMlp<Real> mlp_;
  ParamTensor<Real> env_;
};

}  // namespace neilf
