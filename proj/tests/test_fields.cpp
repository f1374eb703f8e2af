#include "doctest.h"
#include "test_support.hpp"

#include "neilf/fields.hpp"
#include "neilf/sampling.hpp"

#include <cmath>

using namespace neilf;
using doctest::Approx;

namespace {

using MatD = Matrix<double>;

MatD random_points(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  MatD m(n, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

MatD random_dirs(Rng& rng, int n) {
  MatD m(n, 3);
  for (int i = 0; i < n; ++i) {
    Vec3 d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (d.norm() < 1e-3) d = Vec3::UnitZ();
    m.row(i) = d.normalized().transpose();
  }
  return m;
}

FieldConfig small_config(int layers = 3, int width = 32) {
  FieldConfig c;
  c.hidden_layers = layers;
  c.width = width;
  c.skip_at = layers > 2 ? 2 : -1;
  return c;
}

ParamTensor<double>* find_param(std::vector<ParamTensor<double>*> params, const std::string& name) {
  for (auto* p : params)
    if (p->name == name) return p;
  return nullptr;
}

double stddev(const MatD& m) {
  const double mean = m.mean();
  return std::sqrt((m.array() - mean).square().mean());
}

}  // namespace

TEST_CASE("siren initialization keeps pre-activations in unit range") {
  FieldConfig cfg;
  cfg.hidden_layers = 6;
  cfg.width = 256;
  cfg.skip_at = 3;
  SirenMlp<double> mlp("t", cfg, ad::encoded_width(3, cfg.pe_frequencies), 5);
  Rng rng(7);
  mlp.initialize(rng);
  const MatD x = random_points(rng, 2048);
  const auto pre = mlp.pre_activations(ad::encode_positions(x, cfg.pe_frequencies));
  REQUIRE(pre.size() == 6);
  for (std::size_t l = 0; l < pre.size(); ++l) {
    CAPTURE(l);
    const double s = stddev(pre[l]);
    CHECK(s >= 0.5);
    CHECK(s <= 2.0);
  }
}

TEST_CASE("skip connection widens the configured layer") {
  FieldConfig cfg = small_config(4, 16);
  cfg.skip_at = 2;
  SirenMlp<double> mlp("m", cfg, 9, 2);
  auto params = mlp.parameters();
  CHECK(find_param(params, "m.w1")->cols() == 16);
  CHECK(find_param(params, "m.w2")->cols() == 16 + 9);
  CHECK(find_param(params, "m.w_out")->rows() == 2);
  cfg.skip_at = -1;
  SirenMlp<double> plain("m", cfg, 9, 2);
  CHECK(find_param(plain.parameters(), "m.w2")->cols() == 16);
}

TEST_CASE("brdf squash ranges") {
  Tape<double> tape;
  MatD logits(3, kBrdfChannels);
  logits.row(0).setConstant(-80.0);
  logits.row(1).setConstant(80.0);
  logits.row(2).setZero();
  const MatD p = tape.value(brdf_squash(tape, tape.constant(logits)));
  for (int c = 0; c < 3; ++c) {
    CHECK(p(0, c) == Approx(0.0).epsilon(1e-12));
    CHECK(p(1, c) == Approx(1.0));
    CHECK(p(2, c) == Approx(0.5));
  }
  CHECK(p(0, kRoughnessCol) == Approx(kRoughnessMin));
  CHECK(p(1, kRoughnessCol) == Approx(1.0));
  CHECK(p(2, kRoughnessCol) == Approx(kRoughnessMin + (1 - kRoughnessMin) * 0.5));
  CHECK(p(2, kMetallicCol) == Approx(0.5));

  BrdfField<double> field(small_config());
  Rng rng(3);
  field.initialize(rng);
  for (int i = 0; i < 50; ++i) {
    const Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK(field.eval_point(x).valid());
  }
}

TEST_CASE("zeroed output layer returns the squashed bias") {
  BrdfField<double> field(small_config());
  Rng rng(5);
  field.initialize(rng);
  auto params = field.mlp().parameters();
  find_param(params, "brdf.w_out")->values.setZero();
  auto* b = find_param(params, "brdf.b_out");
  b->values << 0.0, 1.0, -1.0, 0.0, 2.0;
  const BrdfParams p = field.eval_point(Vec3(0.3, -0.2, 0.7));
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  CHECK(p.base_color.x() == Approx(0.5));
  CHECK(p.base_color.y() == Approx(sig(1.0)));
  CHECK(p.base_color.z() == Approx(sig(-1.0)));
  CHECK(p.roughness == Approx(kRoughnessMin + (1 - kRoughnessMin) * 0.5));
  CHECK(p.metallic == Approx(sig(2.0)));
}

TEST_CASE("brdf spatial gradients match finite differences") {
  FieldConfig cfg = small_config(3, 24);
  cfg.omega0 = 6.0f;
  BrdfField<double> field(cfg);
  Rng rng(9);
  field.initialize(rng);
  const MatD x = random_points(rng, 6, -0.8, 0.8);
  Tape<double> tape;
  const auto out = field.eval(tape, tape.constant(x), true);
  const MatD g = tape.value(out.spatial);
  REQUIRE(g.cols() == 6);
  const double h = 1e-6;
  for (int i = 0; i < x.rows(); ++i) {
    for (int d = 0; d < 3; ++d) {
      Vec3 xp = x.row(i).transpose(), xm = xp;
      xp[d] += h;
      xm[d] -= h;
      const BrdfParams pp = field.eval_point(xp), pm = field.eval_point(xm);
      CHECK(g(i, d) == Approx((pp.roughness - pm.roughness) / (2 * h)).epsilon(1e-5));
      CHECK(g(i, 3 + d) == Approx((pp.metallic - pm.metallic) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("loss on spatial gradients back-propagates to weights") {
  FieldConfig cfg = small_config(2, 12);
  cfg.omega0 = 5.0f;
  BrdfField<double> field(cfg);
  Rng rng(13);
  field.initialize(rng);
  const MatD x = random_points(rng, 4, -0.5, 0.5);

  auto loss_value = [&] {
    Tape<double> t;
    const auto out = field.eval(t, t.constant(x), true);
    return t.value(out.spatial).squaredNorm();
  };
  Tape<double> tape;
  const auto out = field.eval(tape, tape.constant(x), true);
  Var loss = ad::sum(tape, ad::mul(tape, out.spatial, out.spatial));
  tape.backward(loss);
  auto grads = tape.param_grads();
  auto params = field.mlp().parameters();
  for (const std::string name : {"brdf.w0", "brdf.b1", "brdf.w_out"}) {
    ParamTensor<double>* p = find_param(params, name);
    REQUIRE(p != nullptr);
    MatD g;
    for (auto& [ptr, gr] : grads)
      if (ptr == p) g = gr;
    REQUIRE(g.size() == p->size());
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(p->size(), 5); ++k) {
      const double orig = p->values.data()[k];
      p->values.data()[k] = orig + 1e-6;
      const double fp = loss_value();
      p->values.data()[k] = orig - 1e-6;
      const double fm = loss_value();
      p->values.data()[k] = orig;
      const double fd = (fp - fm) / 2e-6;
      CAPTURE(name);
      CHECK(std::abs(g.data()[k] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("neural incident light field is positive and position dependent") {
  LightingModel<double> light(LightingKind::kNeilf, small_config());
  Rng rng(17);
  light.initialize(rng);
  Tape<double> tape;
  const MatD pos = random_points(rng, 64);
  const MatD dirs = random_dirs(rng, 64);
  const MatD v = tape.value(light.eval(tape, pos, dirs));
  CHECK(v.rows() == 64);
  CHECK(v.cols() == 3);
  CHECK((v.array() > 0.0).all());
  const Vec3 d = dirs.row(0).transpose();
  CHECK((light.eval_point(Vec3(0.5, 0.1, 0.2), d) - light.eval_point(Vec3(-0.4, 0.3, -0.6), d)).norm() > 1e-6);
}

TEST_CASE("environment-only lighting ignores position") {
  LightingModel<double> light(LightingKind::kNeEnv, small_config());
  Rng rng(19);
  light.initialize(rng);
  const Vec3 d = Vec3(0.2, -0.5, 0.7).normalized();
  const Spectrum a = light.eval_point(Vec3(0.9, -0.9, 0.1), d);
  const Spectrum b = light.eval_point(Vec3(-0.3, 0.4, -0.8), d);
  CHECK((a - b).norm() == 0.0);
  CHECK((a.array() > 0.0).all());
  CHECK((light.eval_point(Vec3::Zero(), Vec3::UnitX()) - a).norm() > 0.0);
}

TEST_CASE("lat-long grid") {
  SUBCASE("texel centres map to a single tap") {
    for (int row = 0; row < kEnvHeight; ++row) {
      for (int col = 0; col < kEnvWidth; ++col) {
        const Vec3 d = latlong_direction((col + 0.5) / kEnvWidth, (row + 0.5) / kEnvHeight);
        CHECK(d.norm() == Approx(1.0));
        const EnvTap tap = env_bilinear_taps(d, kEnvWidth, kEnvHeight);
        double w = 0.0;
        for (int k = 0; k < 4; ++k)
          if (tap.index[k] == row * kEnvWidth + col) w += tap.weight[k];
        CHECK(w == Approx(1.0).epsilon(1e-9));
      }
    }
  }
  SUBCASE("azimuth wraps around") {
    const EnvTap tap = env_bilinear_taps(Vec3(1.0, -1e-9, 0.0).normalized(), kEnvWidth, kEnvHeight);
    bool first = false, last = false;
    for (int k = 0; k < 4; ++k) {
      if (tap.weight[k] < 1e-6) continue;
      first |= tap.index[k] % kEnvWidth == 0;
      last |= tap.index[k] % kEnvWidth == kEnvWidth - 1;
    }
    CHECK(first);
    CHECK(last);
  }
  SUBCASE("constant grid gives constant radiance") {
    LightingModel<double> env(LightingKind::kPixEnv, small_config());
    Rng rng(23);
    env.initialize(rng, 0.75);
    Tape<double> tape;
    const MatD dirs = random_dirs(rng, 200);
    const MatD v = tape.value(env.eval(tape, MatD::Zero(200, 3), dirs));
    CHECK((v.array() - 0.75).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("projection clamps negative texels") {
    LightingModel<double> env(LightingKind::kPixEnv, small_config());
    Rng rng(29);
    env.initialize(rng, 1.0);
    env.env().values(3, 1) = -0.5;
    env.project();
    CHECK(env.env().values(3, 1) == 0.0);
    CHECK(env.env().values(4, 1) == 1.0);
  }
}

TEST_CASE("float cast preserves field output") {
  BrdfField<double> field(small_config());
  Rng rng(31);
  field.initialize(rng);
  const BrdfField<float> f = field.cast<float>();
  const Vec3 x(0.1, 0.2, -0.3);
  const BrdfParams a = field.eval_point(x);
  const BrdfParamsT<float> b = f.eval_point(x.cast<float>());
  CHECK(std::abs(a.roughness - b.roughness) < 1e-4);
  CHECK((a.base_color.cast<float>() - b.base_color).norm() < 1e-4f);
}

TEST_CASE("lighting kind names") {
  CHECK(parse_lighting_kind("neilf") == LightingKind::kNeilf);
  CHECK(to_string(parse_lighting_kind(to_string(LightingKind::kNeEnv))) == to_string(LightingKind::kNeEnv));
  CHECK(to_string(parse_lighting_kind(to_string(LightingKind::kPixEnv))) == to_string(LightingKind::kPixEnv));
  CHECK_THROWS_AS(parse_lighting_kind("sunlight"), Error);
}
