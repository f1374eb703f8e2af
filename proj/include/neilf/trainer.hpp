#pragma once

// Optimization loop: batched pixel sampling, rendering, loss assembly, Adam with a step schedule,
// periodic checkpoints and a newline-delimited JSON metrics log.

#include "neilf/dataset.hpp"
#include "neilf/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace neilf {

struct TrainConfig {
  int total_iters = 15000;
  int batch_size = 16000;
  double lr_init = 1e-3;
  double decay_factor = 0.31622776601683794;  // sqrt(0.1)
  std::vector<int> decay_iters{5000, 10000};
  int train_samples = 128;
  int eval_samples = 256;
  SamplerKind sampler = SamplerKind::kFibonacci;
  LightingKind lighting = LightingKind::kNeilf;
  LossWeights weights;
  std::uint64_t seed = 0;
  FieldConfig brdf_field;
  FieldConfig light_field;
  FresnelMode fresnel = FresnelMode::kPrinted;
  int checkpoint_every = 500;
  // Points per tape; also the unit of parallel work and of the fixed-order gradient reduction.
  int chunk_size = 128;
  int workers = 0;  // 0 = default_worker_count()
  double env_init = 1.0;
  double ldr_gamma_init = 1.0 / 2.2;

  static TrainConfig paper();
  static TrainConfig desk();
  static TrainConfig preset(std::string_view name);

  // Scales the decay milestones to 1/3 and 2/3 of total_iters.
  void proportional_milestones();
  void validate() const;
};

double lr_at(int iter, const TrainConfig& cfg);

// String access to every TrainConfig field, keyed by the names listed in config_keys(). Used by
// the C API and the command line.
const std::vector<std::string>& config_keys();
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& cfg, std::string_view key);
std::string config_to_json(const TrainConfig& cfg);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Matrix<float>> m;
  std::vector<Matrix<float>> v;
  std::int64_t step = 0;
};

// Bias-corrected Adam on each tensor's accumulated grads. Throws Error(kNumerical) naming the
// tensor when a gradient is non-finite; nothing is modified in that case.
void adam_step(const std::vector<ParamTensor<float>*>& params, AdamState& state, double lr);

// Fresh model for a config; gamma trains (init ldr_gamma_init) only for LDR scenes.
Model<float> init_model(const TrainConfig& cfg, ColorSpace color_space);

// Seed of the pixel batch and random directions drawn at a given iteration.
std::uint64_t batch_seed(std::uint64_t seed, int iter);

// One forward/backward over a batch. Gradients are accumulated into the model's tensors (which
// are zeroed first); the returned terms are batch means.
LossTerms compute_gradients(Model<float>& model, const PixelBatch& batch, const RenderOptions& opts, bool ldr,
                            const LossWeights& weights, int chunk_size, int workers);

struct TrainResult {
  Model<float> model;
  std::vector<LossTerms> history;  // per iteration, before that iteration's update
};

using IterationCallback = std::function<void(int iter, double lr, const LossTerms& terms)>;

// Writes metrics.jsonl, timing.jsonl, ckpt_NNNNNN every checkpoint_every iterations and `final`
// into out_dir; pass an empty path to keep everything in memory.
TrainResult train(const SceneDataset& scene, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const IterationCallback& on_iteration = {});

}  // namespace neilf
