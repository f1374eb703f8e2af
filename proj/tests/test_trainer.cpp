#include "doctest.h"
#include "test_support.hpp"

#include "neilf/checkpoint.hpp"
#include "neilf/trainer.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

using namespace neilf;
using doctest::Approx;
using testing::TempDir;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrainConfig tiny_config() {
  TrainConfig cfg = TrainConfig::desk();
  cfg.total_iters = 6;
  cfg.batch_size = 48;
  cfg.train_samples = 8;
  cfg.brdf_field.hidden_layers = 2;
  cfg.brdf_field.width = 16;
  cfg.brdf_field.skip_at = 1;
  cfg.light_field.hidden_layers = 2;
  cfg.light_field.width = 16;
  cfg.light_field.skip_at = 1;
  cfg.chunk_size = 16;
  cfg.checkpoint_every = 3;
  cfg.proportional_milestones();
  return cfg;
}

// Shared small dataset, generated once per process.
const SceneDataset& tiny_scene() {
  static TempDir dir("trainer_scene");
  static const SceneDataset scene = [] {
    GenerateOptions o;
    o.views = 4;
    o.resolution = 12;
    o.spp = 16;
    o.holdout_step = 4;
    generate_dataset(make_scene("sphere-plane"), o, dir.path());
    return load_scene(dir.path());
  }();
  return scene;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  const TrainConfig paper = TrainConfig::paper();
  CHECK(lr_at(0, paper) == 1e-3);
  CHECK(lr_at(4999, paper) == 1e-3);
  CHECK(lr_at(5000, paper) == Approx(3.1622776601683794e-4).epsilon(1e-12));
  CHECK(lr_at(10000, paper) == Approx(1e-4).epsilon(1e-12));
  double prev = 1.0;
  for (int i = 0; i < paper.total_iters; i += 250) {
    CHECK(lr_at(i, paper) <= prev);
    prev = lr_at(i, paper);
  }
  TrainConfig desk = TrainConfig::desk();
  desk.total_iters = 3000;
  desk.proportional_milestones();
  CHECK(desk.decay_iters == std::vector<int>{1000, 2000});
}

TEST_CASE("config validation and string access") {
  TrainConfig cfg = TrainConfig::paper();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.batch_size == 16000);
  CHECK(cfg.train_samples == 128);
  CHECK(cfg.eval_samples == 256);
  CHECK(cfg.brdf_field.width == 512);

  for (const auto& key : config_keys()) {
    TrainConfig copy = cfg;
    set_config_value(copy, key, get_config_value(cfg, key));
    CHECK(get_config_value(copy, key) == get_config_value(cfg, key));
  }
  set_config_value(cfg, "decay_iters", "10,20");
  CHECK(cfg.decay_iters == std::vector<int>{10, 20});
  set_config_value(cfg, "lighting", "pix_env");
  CHECK(cfg.lighting == LightingKind::kPixEnv);
  set_config_value(cfg, "w_l", "0.5");
  CHECK(cfg.weights.lambertian == 0.5);
  CHECK_THROWS_AS(set_config_value(cfg, "no_such_key", "1"), Error);
  CHECK_THROWS_AS(set_config_value(cfg, "batch_size", "12abc"), Error);

  TrainConfig bad = TrainConfig::paper();
  bad.decay_iters = {10000, 5000};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TrainConfig::paper();
  bad.decay_iters = {20000};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TrainConfig::paper();
  bad.lr_init = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(TrainConfig::preset("huge"), Error);
}

TEST_CASE("adam") {
  ParamTensor<float> p("p", 1, 3);
  p.values << 1.0f, -2.0f, 0.5f;
  std::vector<ParamTensor<float>*> params{&p};
  AdamState st;

  SUBCASE("zero gradient leaves parameters unchanged") {
    p.zero_grad();
    adam_step(params, st, 1e-3);
    CHECK(st.step == 1);
    CHECK(p.values(0, 0) == 1.0f);
    CHECK(p.values(0, 1) == -2.0f);
  }
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    p.grads << 3.0f, -0.01f, 250.0f;
    adam_step(params, st, 1e-3);
    CHECK(p.values(0, 0) == Approx(1.0 - 1e-3).epsilon(1e-5));
    CHECK(p.values(0, 1) == Approx(-2.0 + 1e-3).epsilon(1e-5));
    CHECK(p.values(0, 2) == Approx(0.5 - 1e-3).epsilon(1e-5));
  }
  SUBCASE("second step follows the bias-corrected recurrence") {
    p.grads << 1.0f, 1.0f, 1.0f;
    adam_step(params, st, 0.1);
    p.grads << 3.0f, 3.0f, 3.0f;
    adam_step(params, st, 0.1);
    const double m = (0.9 * 0.1 * 1.0 + 0.1 * 3.0) / (1 - 0.81);
    const double v = (0.999 * 0.001 * 1.0 + 0.001 * 9.0) / (1 - 0.999 * 0.999);
    CHECK(p.values(0, 0) == Approx(1.0 - 0.1 - 0.1 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-5));
  }
  SUBCASE("non-finite gradient names the tensor and changes nothing") {
    p.grads << 1.0f, std::numeric_limits<float>::infinity(), 0.0f;
    try {
      adam_step(params, st, 1e-3);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == Error::Kind::kNumerical);
      CHECK(std::string(e.what()).find("'p'") != std::string::npos);
    }
    CHECK(p.values(0, 0) == 1.0f);
    CHECK(st.step == 0);
  }
}

TEST_CASE("model initialization") {
  const TrainConfig cfg = tiny_config();
  const Model<float> hdr = init_model(cfg, ColorSpace::kHdr);
  CHECK_FALSE(hdr.gamma_trainable);
  CHECK(hdr.gamma() == 1.0f);
  const Model<float> ldr = init_model(cfg, ColorSpace::kLdr);
  CHECK(ldr.gamma_trainable);
  CHECK(ldr.gamma() == Approx(1.0 / 2.2).epsilon(1e-6));
  Model<float> copy = init_model(cfg, ColorSpace::kHdr);
  CHECK(copy.parameters().size() == hdr.brdf.mlp().parameters().size() + hdr.lighting.mlp().parameters().size());
  CHECK(batch_seed(1, 5) == batch_seed(1, 5));
  CHECK(batch_seed(1, 5) != batch_seed(1, 6));
  CHECK(batch_seed(1, 5) != batch_seed(2, 5));
}

TEST_CASE("gradient reduction does not depend on the worker count") {
  const SceneDataset& scene = tiny_scene();
  const TrainConfig cfg = tiny_config();
  const PixelBatch batch = sample_batch(scene, 40, 3);
  RenderOptions opts;
  opts.samples = 8;
  auto grads_with = [&](int workers) {
    Model<float> model = init_model(cfg, scene.color_space);
    const LossTerms t = compute_gradients(model, batch, opts, false, cfg.weights, 16, workers);
    std::vector<Matrix<float>> out;
    for (auto* p : model.parameters()) out.push_back(p->grads);
    return std::make_pair(t.total, out);
  };
  const auto a = grads_with(1), b = grads_with(3);
  CHECK(a.first == b.first);
  REQUIRE(a.second.size() == b.second.size());
  for (std::size_t i = 0; i < a.second.size(); ++i) CHECK(a.second[i] == b.second[i]);
}

TEST_CASE("training is deterministic and writes logs and checkpoints") {
  const SceneDataset& scene = tiny_scene();
  const TrainConfig cfg = tiny_config();
  TempDir a("train_a"), b("train_b");
  std::vector<int> seen;
  const TrainResult ra = train(scene, cfg, a.path(), [&](int it, double, const LossTerms&) { seen.push_back(it); });
  train(scene, cfg, b.path());
  CHECK(seen.size() == 6);
  CHECK(ra.history.size() == 6);
  for (const char* f : {"metrics.jsonl", "final", "ckpt_000003"}) {
    CAPTURE(f);
    REQUIRE(std::filesystem::exists(a.path() / f));
    CHECK(read_file(a.path() / f) == read_file(b.path() / f));
  }
  CHECK(std::filesystem::exists(a.path() / "timing.jsonl"));

  std::istringstream lines(read_file(a.path() / "metrics.jsonl"));
  int count = 0;
  for (std::string line; std::getline(lines, line); ++count) {
    for (const char* k : {"\"iter\"", "\"lr\"", "\"l_image\"", "\"l_smooth\"", "\"l_lambertian\"", "\"total\""})
      CHECK(line.find(k) != std::string::npos);
    CHECK(line.find("wall_ms") == std::string::npos);
  }
  CHECK(count == 6);

  TrainConfig other = cfg;
  other.seed = 99;
  TempDir c("train_c");
  train(scene, other, c.path());
  CHECK(read_file(a.path() / "final") != read_file(c.path() / "final"));
}

TEST_CASE("checkpoint round trip") {
  TrainConfig cfg = tiny_config();
  for (LightingKind kind : {LightingKind::kNeilf, LightingKind::kNeEnv, LightingKind::kPixEnv}) {
    cfg.lighting = kind;
    Model<float> model = init_model(cfg, ColorSpace::kLdr);
    model.fresnel = FresnelMode::kSchlick;
    const auto bytes = serialize_checkpoint(model, 42);
    const Checkpoint ck = deserialize_checkpoint(bytes);
    CHECK(ck.iteration == 42);
    CHECK(ck.model.lighting.kind() == kind);
    CHECK(ck.model.fresnel == FresnelMode::kSchlick);
    CHECK(ck.model.gamma_trainable);
    CHECK(serialize_checkpoint(ck.model, 42) == bytes);
  }

  Model<float> model = init_model(cfg, ColorSpace::kHdr);
  auto bytes = serialize_checkpoint(model, 1);
  TempDir dir("ckpt");
  save_checkpoint(dir.path() / "m.ckpt", model, 1);
  CHECK(load_checkpoint(dir.path() / "m.ckpt").iteration == 1);
  CHECK_FALSE(std::filesystem::exists(dir.path() / "m.ckpt.tmp"));

  auto wrong_version = bytes;
  wrong_version[8] = 7;
  try {
    deserialize_checkpoint(wrong_version);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), Error);
  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), Error);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.ckpt"), Error);
}

TEST_CASE("loss falls during a short run") {
  const SceneDataset& scene = tiny_scene();
  TrainConfig cfg = tiny_config();
  cfg.total_iters = 80;
  cfg.proportional_milestones();
  cfg.weights.smooth = 0.0;
  cfg.weights.lambertian = 0.0;
  const TrainResult r = train(scene, cfg, {});
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) {
    head += r.history[static_cast<std::size_t>(i)].total;
    tail += r.history[r.history.size() - 1 - static_cast<std::size_t>(i)].total;
  }
  CHECK(tail < 0.5 * head);
}
