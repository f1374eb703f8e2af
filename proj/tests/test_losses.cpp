#include "doctest.h"
#include "test_support.hpp"

#include "neilf/losses.hpp"

#include <cmath>
#include <array>
#include <limits>

using namespace neilf;
using doctest::Approx;

namespace {

using MatD = Matrix<double>;

PixelBatch batch_of(std::initializer_list<Spectrum> observed) {
  PixelBatch b;
  for (const auto& o : observed) {
    PixelSample s;
    s.observed = o;
    b.entries.push_back(s);
  }
  return b;
}

BrdfParams rm(double r, double m) {
  BrdfParams p;
  p.roughness = r;
  p.metallic = m;
  return p;
}

}  // namespace

TEST_CASE("image L1") {
  const PixelBatch one = batch_of({Spectrum(1, 0, 0)});
  const std::vector<Spectrum> same{Spectrum(1, 0, 0)};
  CHECK(image_l1(one, same) == 0.0);
  const std::vector<Spectrum> black{Spectrum::Zero()};
  CHECK(image_l1(one, black) == Approx(1.0));

  const PixelBatch two = batch_of({Spectrum(0.3, 0, 0), Spectrum(0, 0.2, 0.4)});
  const std::vector<Spectrum> zero2{Spectrum::Zero(), Spectrum::Zero()};
  CHECK(image_l1(two, zero2) == Approx(0.45));
  CHECK_THROWS_AS(image_l1(one, zero2), Error);
  CHECK_THROWS_AS(image_l1(PixelBatch{}, std::vector<Spectrum>{}), Error);
}

TEST_CASE("smoothness") {
  PixelBatch b = batch_of({Spectrum::Zero()});
  const std::vector<Vec3> gr{Vec3(2, 0, 0)}, gm{Vec3(0, 0.6, 0.8)};
  CHECK(smoothness_loss(b, gr, gm) == Approx(3.0));
  b.entries[0].grad_magnitude = std::log(3.0);
  CHECK(smoothness_loss(b, gr, gm) == Approx(1.0));
  const std::vector<Vec3> z{Vec3::Zero()};
  CHECK(smoothness_loss(b, z, z) == 0.0);
}

TEST_CASE("lambertian prior") {
  const PixelBatch one = batch_of({Spectrum::Zero()});
  const PixelBatch two = batch_of({Spectrum::Zero(), Spectrum::Zero()});
  CHECK(lambertian_loss(two, std::vector<BrdfParams>{rm(1, 0), rm(1, 0)}) == 0.0);
  CHECK(lambertian_loss(one, std::vector<BrdfParams>{rm(0.5, 0.25)}) == Approx(0.75));
  CHECK(lambertian_loss(two, std::vector<BrdfParams>{rm(1, 1), rm(0, 0)}) == Approx(1.0));
}

TEST_CASE("total loss") {
  LossWeights w;
  CHECK(total_loss(1.0, 0.0, 0.0, w) == 1.0);
  CHECK(total_loss(0.5, 10.0, 10.0, w) == Approx(0.511));
  CHECK(total_loss(0.0, 0.0, 0.0, w) == 0.0);
  CHECK_THROWS_AS(total_loss(std::numeric_limits<double>::quiet_NaN(), 0, 0, w), Error);
  w.smooth = -1.0;
  CHECK_THROWS_AS(w.validate(), Error);
}

TEST_CASE("tape losses match scalar forms and split into chunks exactly") {
  Rng rng(4);
  const int n = 10;
  MatD rendered(n, 3), observed(n, 3), spatial(n, 6), gmag(n, 1), material(n, kBrdfChannels);
  for (Eigen::Index i = 0; i < rendered.size(); ++i) rendered.data()[i] = rng.uniform(0, 1);
  for (Eigen::Index i = 0; i < observed.size(); ++i) observed.data()[i] = rng.uniform(0, 1);
  for (Eigen::Index i = 0; i < spatial.size(); ++i) spatial.data()[i] = rng.uniform(-2, 2);
  for (Eigen::Index i = 0; i < gmag.size(); ++i) gmag.data()[i] = rng.uniform(0, 3);
  for (Eigen::Index i = 0; i < material.size(); ++i) material.data()[i] = rng.uniform(0.01, 1);

  PixelBatch batch;
  std::vector<Spectrum> r;
  std::vector<Vec3> gr, gm;
  std::vector<BrdfParams> params;
  for (int i = 0; i < n; ++i) {
    PixelSample s;
    s.observed = observed.row(i).transpose();
    s.grad_magnitude = gmag(i, 0);
    batch.entries.push_back(s);
    r.push_back(rendered.row(i).transpose());
    gr.push_back(spatial.row(i).segment<3>(0).transpose());
    gm.push_back(spatial.row(i).segment<3>(3).transpose());
    params.push_back(rm(material(i, kRoughnessCol), material(i, kMetallicCol)));
  }

  auto eval = [&](int begin, int count) {
    Tape<double> t;
    const double nn = n;
    const double a = t.value(image_l1(t, t.constant(rendered.middleRows(begin, count)),
                                      MatD(observed.middleRows(begin, count)), nn))(0, 0);
    const double b = t.value(smoothness_loss(t, t.constant(spatial.middleRows(begin, count)),
                                             MatD(gmag.middleRows(begin, count)), nn))(0, 0);
    const double c = t.value(lambertian_loss(t, t.constant(material.middleRows(begin, count)), nn))(0, 0);
    return std::array<double, 3>{a, b, c};
  };
  const auto whole = eval(0, n);
  CHECK(whole[0] == Approx(image_l1(batch, r)).epsilon(1e-14));
  CHECK(whole[1] == Approx(smoothness_loss(batch, gr, gm)).epsilon(1e-14));
  CHECK(whole[2] == Approx(lambertian_loss(batch, params)).epsilon(1e-14));

  const auto c1 = eval(0, 4), c2 = eval(4, 6);
  for (int k = 0; k < 3; ++k) CHECK(c1[k] + c2[k] == Approx(whole[k]).epsilon(1e-14));
}

TEST_CASE("tape loss gradients") {
  MatD rendered(2, 3), observed(2, 3);
  rendered << 0.2, 0.5, 0.9, 0.1, 0.0, 0.3;
  observed << 0.3, 0.4, 0.9 - 0.25, 0.0, 0.2, 0.3 + 0.5;
  Tape<double> t;
  Var v = t.variable(rendered);
  t.backward(image_l1(t, v, observed, 4.0));
  const MatD g = t.grad(v);
  CHECK(g(0, 0) == Approx(-0.25));
  CHECK(g(0, 1) == Approx(0.25));
  CHECK(g(1, 2) == Approx(-0.25));

  MatD mat(1, kBrdfChannels);
  mat << 0.5, 0.5, 0.5, 0.4, 0.3;
  Tape<double> t2;
  Var m = t2.variable(mat);
  t2.backward(lambertian_loss(t2, m, 1.0));
  CHECK(t2.grad(m)(0, kRoughnessCol) == Approx(-1.0));
  CHECK(t2.grad(m)(0, kMetallicCol) == Approx(1.0));
  CHECK(t2.grad(m)(0, 0) == 0.0);

  MatD sp(1, 6), gm(1, 1);
  sp << 3, 0, 4, 0, 0, 2;
  gm << 0.0;
  Tape<double> t3;
  Var s = t3.variable(sp);
  t3.backward(smoothness_loss(t3, s, gm, 1.0));
  CHECK(t3.grad(s)(0, 0) == Approx(0.6));
  CHECK(t3.grad(s)(0, 2) == Approx(0.8));
  CHECK(t3.grad(s)(0, 5) == Approx(1.0));
}

TEST_CASE("tape total loss skips absent terms") {
  LossWeights w;
  w.image = 0.0;
  w.lambertian = 2.0;
  MatD mat(1, kBrdfChannels);
  mat << 0.5, 0.5, 0.5, 0.4, 0.3;
  Tape<double> t;
  Var m = t.variable(mat);
  Var total = total_loss(t, Var{}, Var{}, lambertian_loss(t, m, 1.0), w);
  CHECK(t.value(total)(0, 0) == Approx(2.0 * 0.9));
  t.backward(total);
  CHECK(t.grad(m)(0, kMetallicCol) == Approx(2.0));
}
