#include "neilf/losses.hpp"

#include <cmath>
#include <sstream>

namespace neilf {

void LossWeights::validate() const {
  if (!(image >= 0.0) || !(smooth >= 0.0) || !(lambertian >= 0.0)) {
    fail(Error::Kind::kInvalidArgument, "loss weights must be >= 0");
  }
}

namespace {

template <typename Real>
Real sign_of(Real v) {
  return v > Real(0) ? Real(1) : (v < Real(0) ? Real(-1) : Real(0));
}

template <typename Real>
Matrix<Real> scalar(Real v) {
  Matrix<Real> m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

template <typename Real>
Var image_l1(Tape<Real>& tape, Var rendered, const Matrix<Real>& observed, Real normalizer) {
  const Matrix<Real>& r = tape.value(rendered);
  if (r.rows() != observed.rows() || r.cols() != observed.cols()) fail(Error::Kind::kInternal, "image_l1: shape mismatch");
  const Real loss = (r - observed).cwiseAbs().sum() / normalizer;
  return tape.record(scalar(loss), {rendered}, [rendered, observed, normalizer](Tape<Real>& t, int self) {
    const Real g = t.grad_ref(self)(0, 0) / normalizer;
    const Matrix<Real>& rv = t.value(rendered);
    Matrix<Real>& gr = t.grad_ref(rendered.id);
    for (Eigen::Index i = 0; i < rv.size(); ++i) gr.data()[i] += g * sign_of(rv.data()[i] - observed.data()[i]);
  });
}

template <typename Real>
Var smoothness_loss(Tape<Real>& tape, Var spatial, const Matrix<Real>& grad_magnitude, Real normalizer) {
  const Matrix<Real>& s = tape.value(spatial);
  if (s.cols() != 6 || grad_magnitude.rows() != s.rows()) fail(Error::Kind::kInternal, "smoothness_loss: shape mismatch");
  Real loss = Real(0);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Real w = std::exp(-grad_magnitude(i, 0));
    loss += (s.row(i).template head<3>().norm() + s.row(i).template tail<3>().norm()) * w;
  }
  loss /= normalizer;
  return tape.record(scalar(loss), {spatial}, [spatial, grad_magnitude, normalizer](Tape<Real>& t, int self) {
    const Real g = t.grad_ref(self)(0, 0) / normalizer;
    const Matrix<Real>& sv = t.value(spatial);
    Matrix<Real>& gs = t.grad_ref(spatial.id);
    for (Eigen::Index i = 0; i < sv.rows(); ++i) {
      const Real w = g * std::exp(-grad_magnitude(i, 0));
      for (int half = 0; half < 2; ++half) {
        const auto v = sv.row(i).template segment<3>(3 * half);
        const Real len = v.norm();
        if (len > Real(0)) gs.row(i).template segment<3>(3 * half) += v * (w / len);
      }
    }
  });
}

template <typename Real>
Var lambertian_loss(Tape<Real>& tape, Var material, Real normalizer) {
  const Matrix<Real>& m = tape.value(material);
  Real loss = Real(0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    loss += std::abs(m(i, kRoughnessCol) - Real(1)) + std::abs(m(i, kMetallicCol));
  }
  loss /= normalizer;
  return tape.record(scalar(loss), {material}, [material, normalizer](Tape<Real>& t, int self) {
    const Real g = t.grad_ref(self)(0, 0) / normalizer;
    const Matrix<Real>& mv = t.value(material);
    Matrix<Real>& gm = t.grad_ref(material.id);
    for (Eigen::Index i = 0; i < mv.rows(); ++i) {
      gm(i, kRoughnessCol) += g * sign_of(mv(i, kRoughnessCol) - Real(1));
      gm(i, kMetallicCol) += g * sign_of(mv(i, kMetallicCol));
    }
  });
}

template <typename Real>
Var total_loss(Tape<Real>& tape, Var image, Var smooth, Var lambertian, const LossWeights& w) {
  std::vector<Var> terms;
  std::vector<Real> weights;
  if (image.valid()) {
    terms.push_back(image);
    weights.push_back(static_cast<Real>(w.image));
  }
  if (smooth.valid()) {
    terms.push_back(smooth);
    weights.push_back(static_cast<Real>(w.smooth));
  }
  if (lambertian.valid()) {
    terms.push_back(lambertian);
    weights.push_back(static_cast<Real>(w.lambertian));
  }
  return ad::weighted_sum(tape, terms, weights);
}

double image_l1(const PixelBatch& batch, std::span<const Spectrum> rendered) {
  if (rendered.size() != batch.size()) fail(Error::Kind::kInvalidArgument, "image_l1: rendered/batch size mismatch");
  if (batch.size() == 0) fail(Error::Kind::kInvalidArgument, "image_l1: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) sum += (batch.entries[i].observed - rendered[i]).cwiseAbs().sum();
  return sum / static_cast<double>(batch.size());
}

double smoothness_loss(const PixelBatch& batch, std::span<const Vec3> grad_r, std::span<const Vec3> grad_m) {
  if (grad_r.size() != batch.size() || grad_m.size() != batch.size()) {
    fail(Error::Kind::kInvalidArgument, "smoothness_loss: gradient/batch size mismatch");
  }
  if (batch.size() == 0) fail(Error::Kind::kInvalidArgument, "smoothness_loss: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sum += (grad_r[i].norm() + grad_m[i].norm()) * std::exp(-batch.entries[i].grad_magnitude);
  }
  return sum / static_cast<double>(batch.size());
}

double lambertian_loss(const PixelBatch& batch, std::span<const BrdfParams> params) {
  if (params.size() != batch.size()) fail(Error::Kind::kInvalidArgument, "lambertian_loss: params/batch size mismatch");
  if (batch.size() == 0) fail(Error::Kind::kInvalidArgument, "lambertian_loss: empty batch");
  double sum = 0.0;
  for (const BrdfParams& p : params) sum += std::abs(p.roughness - 1.0) + std::abs(p.metallic);
  return sum / static_cast<double>(batch.size());
}

double total_loss(double image, double smooth, double lambertian, const LossWeights& w) {
  if (!std::isfinite(image) || !std::isfinite(smooth) || !std::isfinite(lambertian)) {
    std::ostringstream msg;
    msg << "non-finite loss component (image " << image << ", smooth " << smooth << ", lambertian " << lambertian << ")";
    fail(Error::Kind::kNumerical, msg.str());
  }
  return w.image * image + w.smooth * smooth + w.lambertian * lambertian;
}

#define NEILF_INSTANTIATE_LOSSES(Real)                                                         \
  template Var image_l1<Real>(Tape<Real>&, Var, const Matrix<Real>&, Real);                    \
  template Var smoothness_loss<Real>(Tape<Real>&, Var, const Matrix<Real>&, Real);             \
  template Var lambertian_loss<Real>(Tape<Real>&, Var, Real);                                  \
  template Var total_loss<Real>(Tape<Real>&, Var, Var, Var, const LossWeights&);

NEILF_INSTANTIATE_LOSSES(float)
NEILF_INSTANTIATE_LOSSES(double)

}  // namespace neilf
