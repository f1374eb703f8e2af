#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace neilf {

template <typename Real>
using Vec3T = Eigen::Matrix<Real, 3, 1>;
using Vec3 = Vec3T<double>;

// Linear RGB radiance or reflectance.
template <typename Real>
using SpectrumT = Vec3T<Real>;
using Spectrum = SpectrumT<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Lower bound on roughness; the spherical-Gaussian NDF diverges as r -> 0.
inline constexpr double kRoughnessMin = 0.01;
// Floor on n.wi and n.wo in the specular denominator.
inline constexpr double kCosEpsilon = 1e-4;

template <typename Real>
struct BrdfParamsT {
  SpectrumT<Real> base_color = SpectrumT<Real>::Constant(Real(0.5));
  Real roughness = Real(1);
  Real metallic = Real(0);

  bool valid() const {
    if (!base_color.allFinite() || !std::isfinite(roughness) || !std::isfinite(metallic)) return false;
    if ((base_color.array() < Real(0)).any() || (base_color.array() > Real(1)).any()) return false;
    if (roughness < Real(kRoughnessMin) || roughness > Real(1)) return false;
    return metallic >= Real(0) && metallic <= Real(1);
  }
};
using BrdfParams = BrdfParamsT<double>;

// Base error for everything the library reports; the C API maps the kind to an error code.
class Error : public std::runtime_error {
 public:
  enum class Kind { kInvalidArgument, kIo, kFormat, kValidation, kNumerical, kInternal };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] inline void fail(Error::Kind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace neilf
