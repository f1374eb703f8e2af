#pragma once

#include "neilf/brdf.hpp"
#include "neilf/fields.hpp"

#include <vector>

namespace neilf {

// Everything a checkpoint holds: both fields, the learnable tone curve and rendering switches.
template <typename Real>
struct Model {
  BrdfField<Real> brdf;
  LightingModel<Real> lighting;
  // gamma = exp(log_gamma); only trained for LDR scenes.
  ParamTensor<Real> log_gamma{"log_gamma", 1, 1};
  bool gamma_trainable = false;
  FresnelMode fresnel = FresnelMode::kPrinted;

  Model() = default;
  Model(const FieldConfig& brdf_cfg, LightingKind kind, const FieldConfig& light_cfg)
      : brdf(brdf_cfg), lighting(kind, light_cfg) {}

  Real gamma() const { return std::exp(log_gamma.values(0, 0)); }

  // Trainable tensors in a fixed order: BRDF field, lighting, then log_gamma when it trains.
  std::vector<ParamTensor<Real>*> parameters() {
    std::vector<ParamTensor<Real>*> out = brdf.mlp().parameters();
    for (auto* p : lighting.parameters()) out.push_back(p);
    if (gamma_trainable) out.push_back(&log_gamma);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  template <typename Other>
  Model<Other> cast() const {
    Model<Other> out;
    out.brdf = brdf.template cast<Other>();
    out.lighting = lighting.template cast<Other>();
    out.log_gamma = log_gamma.template cast<Other>();
    out.gamma_trainable = gamma_trainable;
    out.fresnel = fresnel;
    return out;
  }
};

}  // namespace neilf
