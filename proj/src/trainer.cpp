#include "neilf/trainer.hpp"

#include "neilf/checkpoint.hpp"
#include "neilf/parallel.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

namespace neilf {

namespace fs = std::filesystem;

TrainConfig TrainConfig::paper() {
  TrainConfig cfg;
  cfg.brdf_field.hidden_layers = 8;
  cfg.brdf_field.width = 512;
  cfg.brdf_field.skip_at = 4;
  cfg.light_field.hidden_layers = 8;
  cfg.light_field.width = 128;
  cfg.light_field.skip_at = 4;
  cfg.light_field.output_activation = OutputActivation::kExponential;
  return cfg;
}

TrainConfig TrainConfig::desk() {
  TrainConfig cfg = paper();
  cfg.total_iters = 3000;
  cfg.batch_size = 512;
  cfg.train_samples = 64;
  cfg.eval_samples = 128;
  cfg.brdf_field.hidden_layers = 4;
  cfg.brdf_field.width = 64;
  cfg.brdf_field.skip_at = 2;
  cfg.light_field.hidden_layers = 4;
  cfg.light_field.width = 64;
  cfg.light_field.skip_at = 2;
  // A low sine frequency keeps the small light field from fitting view-dependent noise, and a
  // stronger Lambertian prior stops metallic drifting to 1 on rough surfaces.
  cfg.light_field.omega0 = 5.0f;
  cfg.weights.lambertian = 1e-2;
  cfg.chunk_size = 64;
  cfg.proportional_milestones();
  return cfg;
}

TrainConfig TrainConfig::preset(std::string_view name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  fail(Error::Kind::kInvalidArgument, "unknown preset '" + std::string(name) + "' (expected paper or desk)");
}

void TrainConfig::proportional_milestones() {
  decay_iters.clear();
  const int a = total_iters / 3;
  const int b = (2 * total_iters) / 3;
  if (a >= 1) decay_iters.push_back(a);
  if (b > a) decay_iters.push_back(b);
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(Error::Kind::kInvalidArgument, "train config: " + msg); };
  if (total_iters < 1) bad("total_iters must be >= 1");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (!(lr_init > 0.0) || !std::isfinite(lr_init)) bad("lr_init must be > 0");
  if (!(decay_factor > 0.0) || !std::isfinite(decay_factor)) bad("decay_factor must be > 0");
  for (std::size_t i = 0; i < decay_iters.size(); ++i) {
    if (decay_iters[i] < 1 || decay_iters[i] >= total_iters) bad("decay_iters must lie in [1, total_iters)");
    if (i > 0 && decay_iters[i] <= decay_iters[i - 1]) bad("decay_iters must be strictly increasing");
  }
  if (train_samples < 1 || eval_samples < 1) bad("sample counts must be >= 1");
  if (checkpoint_every < 1) bad("checkpoint_every must be >= 1");
  if (chunk_size < 1) bad("chunk_size must be >= 1");
  if (workers < 0) bad("workers must be >= 0");
  if (!(env_init >= 0.0)) bad("env_init must be >= 0");
  if (!(ldr_gamma_init > 0.0)) bad("ldr_gamma_init must be > 0");
  weights.validate();
  brdf_field.validate();
  light_field.validate();
}

double lr_at(int iter, const TrainConfig& cfg) {
  double lr = cfg.lr_init;
  for (int m : cfg.decay_iters)
    if (iter >= m) lr *= cfg.decay_factor;
  return lr;
}

void adam_step(const std::vector<ParamTensor<float>*>& params, AdamState& state, double lr) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix<float>::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix<float>::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) fail(Error::Kind::kInvalidArgument, "adam: parameter list changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto* p = params[k];
    if (p->grads.rows() != p->rows() || p->grads.cols() != p->cols() || state.m[k].rows() != p->rows() ||
        state.m[k].cols() != p->cols())
      fail(Error::Kind::kInvalidArgument, "adam: shape mismatch for '" + p->name + "'");
    if (!p->grads.allFinite()) fail(Error::Kind::kNumerical, "adam: non-finite gradient in '" + p->name + "'");
  }
  const std::int64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamTensor<float>& p = *params[k];
    float* m = state.m[k].data();
    float* v = state.v[k].data();
    float* x = p.values.data();
    const float* g = p.grads.data();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.eps);
      x[i] = static_cast<float>(x[i] - update);
    }
  }
  state.step = t;
}

Model<float> init_model(const TrainConfig& cfg, ColorSpace color_space) {
  FieldConfig light_cfg = cfg.light_field;
  light_cfg.output_activation = OutputActivation::kExponential;
  FieldConfig brdf_cfg = cfg.brdf_field;
  brdf_cfg.output_activation = OutputActivation::kBounded01;
  Model<float> model(brdf_cfg, cfg.lighting, light_cfg);
  Rng rng(cfg.seed);
  model.brdf.initialize(rng);
  model.lighting.initialize(rng, static_cast<float>(cfg.env_init));
  model.fresnel = cfg.fresnel;
  model.gamma_trainable = color_space == ColorSpace::kLdr;
  model.log_gamma.values(0, 0) = model.gamma_trainable ? static_cast<float>(std::log(cfg.ldr_gamma_init)) : 0.0f;
  model.log_gamma.zero_grad();
  return model;
}

std::uint64_t batch_seed(std::uint64_t seed, int iter) {
  Rng rng(seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(iter) + 1)));
  return rng.next_u64();
}

namespace {

struct ChunkResult {
  double image = 0.0;
  double smooth = 0.0;
  double lambertian = 0.0;
  double total = 0.0;
  std::vector<std::pair<ParamTensor<float>*, Matrix<float>>> grads;
};

ChunkResult run_chunk(const Model<float>& model, std::span<const PixelSample> samples, const RenderOptions& opts,
                      bool ldr, const LossWeights& w, float normalizer) {
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  std::vector<SurfacePoint> points;
  points.reserve(samples.size());
  Matrix<float> observed(n, 3);
  Matrix<float> gmag(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PixelSample& s = samples[static_cast<std::size_t>(i)];
    points.push_back(s.point);
    observed.row(i) = s.observed.cast<float>().transpose();
    gmag(i, 0) = static_cast<float>(s.grad_magnitude);
  }

  Tape<float> tape;
  const bool spatial = w.smooth > 0.0;
  Var image, material, grads;
  if (w.image > 0.0) {
    const auto rendered = render_points(tape, model, std::span<const SurfacePoint>(points), opts, ldr, spatial);
    image = image_l1(tape, rendered.output, observed, normalizer);
    material = rendered.brdf.params;
    grads = rendered.brdf.spatial;
  } else {
    Matrix<float> pos(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) pos.row(i) = points[static_cast<std::size_t>(i)].x.cast<float>().transpose();
    const auto out = model.brdf.eval(tape, tape.constant(std::move(pos)), spatial);
    material = out.params;
    grads = out.spatial;
  }
  Var smooth = spatial ? smoothness_loss(tape, grads, gmag, normalizer) : Var{};
  Var lamb = w.lambertian > 0.0 ? lambertian_loss(tape, material, normalizer) : Var{};
  Var total = total_loss(tape, image, smooth, lamb, w);

  ChunkResult r;
  if (image.valid()) r.image = tape.value(image)(0, 0);
  if (smooth.valid()) r.smooth = tape.value(smooth)(0, 0);
  if (lamb.valid()) r.lambertian = tape.value(lamb)(0, 0);
  r.total = tape.value(total)(0, 0);
  tape.backward(total);
  r.grads = tape.param_grads();
  return r;
}

}  // namespace

LossTerms compute_gradients(Model<float>& model, const PixelBatch& batch, const RenderOptions& opts, bool ldr,
                            const LossWeights& weights, int chunk_size, int workers) {
  if (batch.size() == 0) fail(Error::Kind::kInvalidArgument, "empty batch");
  if (chunk_size < 1) fail(Error::Kind::kInvalidArgument, "chunk_size must be >= 1");
  model.zero_grad();
  const std::size_t chunk = static_cast<std::size_t>(chunk_size);
  const std::size_t chunks = (batch.size() + chunk - 1) / chunk;
  const float normalizer = static_cast<float>(batch.size());
  std::vector<ChunkResult> results(chunks);
  parallel_for(
      chunks,
      [&](std::size_t c) {
        const std::size_t begin = c * chunk;
        const std::size_t count = std::min(chunk, batch.size() - begin);
        results[c] = run_chunk(model, std::span<const PixelSample>(batch.entries.data() + begin, count), opts, ldr,
                               weights, normalizer);
      },
      workers);

  // Fixed chunk order makes the sums independent of the worker count.
  LossTerms terms;
  for (ChunkResult& r : results) {
    terms.image += r.image;
    terms.smooth += r.smooth;
    terms.lambertian += r.lambertian;
    terms.total += r.total;
    for (auto& [p, g] : r.grads) p->grads += g;
  }
  return terms;
}

namespace {

std::string checkpoint_name(int iter) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06d", iter);
  return buf;
}

}  // namespace

TrainResult train(const SceneDataset& scene, const TrainConfig& cfg, const fs::path& out_dir,
                  const IterationCallback& on_iteration) {
  cfg.validate();
  const bool ldr = scene.color_space == ColorSpace::kLdr;
  TrainResult result;
  result.model = init_model(cfg, scene.color_space);
  Model<float>& model = result.model;
  const int workers = cfg.workers > 0 ? cfg.workers : default_worker_count();

  std::optional<std::ofstream> metrics, timing;
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(Error::Kind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
    metrics.emplace(out_dir / "metrics.jsonl");
    timing.emplace(out_dir / "timing.jsonl");
    if (!*metrics || !*timing) fail(Error::Kind::kIo, "cannot write logs in " + out_dir.string());
  }

  AdamState adam;
  const auto params = model.parameters();
  for (int iter = 0; iter < cfg.total_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = batch_seed(cfg.seed, iter);
    const double lr = lr_at(iter, cfg);
    RenderOptions opts;
    opts.sampler = cfg.sampler;
    opts.samples = cfg.train_samples;
    opts.brdf.fresnel = model.fresnel;
    opts.seed = seed;

    LossTerms terms;
    try {
      const PixelBatch batch = sample_batch(scene, static_cast<std::size_t>(cfg.batch_size), seed);
      terms = compute_gradients(model, batch, opts, ldr, cfg.weights, cfg.chunk_size, workers);
      if (!std::isfinite(terms.total))
        fail(Error::Kind::kNumerical, "non-finite loss " + std::to_string(terms.total));
      adam_step(params, adam, lr);
    } catch (const Error& e) {
      if (e.kind() != Error::Kind::kNumerical) throw;
      fail(Error::Kind::kNumerical, std::string(e.what()) + " at iteration " + std::to_string(iter) +
                                        " (batch seed " + std::to_string(seed) + ")");
    }
    model.lighting.project();
    result.history.push_back(terms);

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (metrics) {
      nlohmann::json rec{{"iter", iter},
                         {"lr", lr},
                         {"l_image", terms.image},
                         {"l_smooth", terms.smooth},
                         {"l_lambertian", terms.lambertian},
                         {"total", terms.total}};
      *metrics << rec.dump() << "\n";
      *timing << nlohmann::json{{"iter", iter}, {"wall_ms", wall_ms}}.dump() << "\n";
      if ((iter + 1) % cfg.checkpoint_every == 0 && iter + 1 < cfg.total_iters)
        save_checkpoint(out_dir / checkpoint_name(iter + 1), model, static_cast<std::uint64_t>(iter + 1));
    }
    if (on_iteration) on_iteration(iter, lr, terms);
  }
  if (metrics) {
    metrics->flush();
    timing->flush();
    if (!*metrics) fail(Error::Kind::kIo, "failed writing metrics in " + out_dir.string());
    save_checkpoint(out_dir / "final", model, static_cast<std::uint64_t>(cfg.total_iters));
  }
  return result;
}

}  // namespace neilf
