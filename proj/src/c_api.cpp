#include "neilf/neilf.h"

#include "neilf/checkpoint.hpp"
#include "neilf/dataset.hpp"
#include "neilf/metrics.hpp"
#include "neilf/trainer.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct neilf_scene {
  neilf::SceneDataset data;
};

struct neilf_config {
  neilf::TrainConfig cfg;
};

struct neilf_model {
  neilf::Model<float> model;
  std::uint64_t iteration = 0;
};

namespace {

thread_local std::string g_last_error;

neilf_status status_of(neilf::Error::Kind kind) {
  using K = neilf::Error::Kind;
  switch (kind) {
    case K::kInvalidArgument: return NEILF_ERR_INVALID_ARGUMENT;
    case K::kIo: return NEILF_ERR_IO;
    case K::kFormat: return NEILF_ERR_FORMAT;
    case K::kValidation: return NEILF_ERR_VALIDATION;
    case K::kNumerical: return NEILF_ERR_NUMERICAL;
    case K::kInternal: return NEILF_ERR_INTERNAL;
  }
  return NEILF_ERR_INTERNAL;
}

template <typename Fn>
neilf_status guard(Fn&& fn) {
  try {
    fn();
    return NEILF_OK;
  } catch (const neilf::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NEILF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NEILF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return NEILF_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) neilf::fail(neilf::Error::Kind::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* neilf_version(void) { return "1.0.0"; }

const char* neilf_last_error(void) { return g_last_error.c_str(); }

const char* neilf_status_name(neilf_status status) {
  switch (status) {
    case NEILF_OK: return "ok";
    case NEILF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case NEILF_ERR_IO: return "io";
    case NEILF_ERR_FORMAT: return "format";
    case NEILF_ERR_VALIDATION: return "validation";
    case NEILF_ERR_NUMERICAL: return "numerical";
    case NEILF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void neilf_string_free(char* s) { std::free(s); }

neilf_status neilf_synth(const char* scene_name, int views, int resolution, int spp, int holdout_step,
                         const char* color_space, const char* out_dir) {
  return guard([&] {
    require(scene_name && out_dir, "scene name and output directory are required");
    neilf::AnalyticScene scene = neilf::make_scene(scene_name);
    if (color_space) scene.color_space = neilf::parse_color_space(color_space);
    neilf::GenerateOptions opts;
    opts.views = views;
    opts.resolution = resolution;
    opts.spp = spp;
    opts.holdout_step = holdout_step;
    neilf::generate_dataset(scene, opts, out_dir);
  });
}

neilf_status neilf_scene_load(const char* dir, const char* gradient_mode, neilf_scene** out) {
  return guard([&] {
    require(dir && out, "directory and output handle are required");
    *out = nullptr;
    neilf::LoadOptions opts;
    if (gradient_mode) {
      const std::string m = gradient_mode;
      if (m == "grayscale") {
        opts.gradient = neilf::GradientMode::kGrayscale;
      } else if (m == "per-channel" || m == "per_channel") {
        opts.gradient = neilf::GradientMode::kPerChannel;
      } else {
        neilf::fail(neilf::Error::Kind::kInvalidArgument, "unknown gradient mode '" + m + "'");
      }
    }
    auto* s = new neilf_scene{neilf::load_scene(dir, opts)};
    *out = s;
  });
}

void neilf_scene_free(neilf_scene* scene) { delete scene; }

int neilf_scene_view_count(const neilf_scene* scene) {
  return scene ? static_cast<int>(scene->data.views.size()) : 0;
}

int neilf_scene_is_ldr(const neilf_scene* scene) {
  return scene && scene->data.color_space == neilf::ColorSpace::kLdr ? 1 : 0;
}

neilf_status neilf_scene_view_ids(const neilf_scene* scene, neilf_split split, int* ids, int capacity, int* count) {
  return guard([&] {
    require(scene && count, "scene and count are required");
    const auto& idx = split == NEILF_SPLIT_TEST ? scene->data.test_views : scene->data.train_views;
    *count = static_cast<int>(idx.size());
    for (int i = 0; i < capacity && i < *count; ++i)
      ids[i] = scene->data.views[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].id;
  });
}

neilf_status neilf_config_create(const char* preset, neilf_config** out) {
  return guard([&] {
    require(out, "output handle is required");
    *out = new neilf_config{neilf::TrainConfig::preset(preset ? preset : "paper")};
  });
}

void neilf_config_free(neilf_config* cfg) { delete cfg; }

neilf_status neilf_config_set(neilf_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg && key && value, "config, key and value are required");
    neilf::set_config_value(cfg->cfg, key, value);
  });
}

neilf_status neilf_config_get(const neilf_config* cfg, const char* key, char** value) {
  return guard([&] {
    require(cfg && key && value, "config, key and output are required");
    *value = dup_string(neilf::get_config_value(cfg->cfg, key));
  });
}

neilf_status neilf_config_keys(char** keys) {
  return guard([&] {
    require(keys, "output is required");
    std::string all;
    for (const auto& k : neilf::config_keys()) all += k + "\n";
    *keys = dup_string(all);
  });
}

neilf_status neilf_config_proportional_milestones(neilf_config* cfg) {
  return guard([&] {
    require(cfg, "config is required");
    cfg->cfg.proportional_milestones();
  });
}

neilf_status neilf_config_validate(const neilf_config* cfg) {
  return guard([&] {
    require(cfg, "config is required");
    cfg->cfg.validate();
  });
}

neilf_status neilf_config_to_json(const neilf_config* cfg, char** json) {
  return guard([&] {
    require(cfg && json, "config and output are required");
    *json = dup_string(neilf::config_to_json(cfg->cfg));
  });
}

neilf_status neilf_train(const neilf_scene* scene, const neilf_config* cfg, const char* out_dir,
                         neilf_progress_fn progress, void* user, neilf_model** model) {
  return guard([&] {
    require(scene && cfg, "scene and config are required");
    if (model) *model = nullptr;
    neilf::IterationCallback cb;
    if (progress)
      cb = [progress, user](int iter, double lr, const neilf::LossTerms& t) { progress(iter, lr, t.total, user); };
    auto result = neilf::train(scene->data, cfg->cfg, out_dir ? std::filesystem::path(out_dir) : std::filesystem::path(),
                               cb);
    if (model)
      *model = new neilf_model{std::move(result.model), static_cast<std::uint64_t>(cfg->cfg.total_iters)};
  });
}

neilf_status neilf_model_load(const char* path, neilf_model** out) {
  return guard([&] {
    require(path && out, "path and output handle are required");
    *out = nullptr;
    neilf::Checkpoint ck = neilf::load_checkpoint(path);
    *out = new neilf_model{std::move(ck.model), ck.iteration};
  });
}

neilf_status neilf_model_save(const neilf_model* model, const char* path) {
  return guard([&] {
    require(model && path, "model and path are required");
    neilf::save_checkpoint(path, model->model, model->iteration);
  });
}

void neilf_model_free(neilf_model* model) { delete model; }

uint64_t neilf_model_iteration(const neilf_model* model) { return model ? model->iteration : 0; }

double neilf_model_gamma(const neilf_model* model) { return model ? static_cast<double>(model->model.gamma()) : 0.0; }

neilf_status neilf_render_view(const neilf_scene* scene, const neilf_model* model, int view_id, int samples,
                               const char* sampler, uint64_t seed, float* rgb, size_t capacity) {
  return guard([&] {
    require(scene && model && rgb, "scene, model and output buffer are required");
    const int vi = scene->data.view_index(view_id);
    const auto& cam = scene->data.views[static_cast<std::size_t>(vi)].camera;
    const std::size_t need = static_cast<std::size_t>(cam.width) * cam.height * 3;
    if (capacity < need)
      neilf::fail(neilf::Error::Kind::kInvalidArgument, "output buffer holds " + std::to_string(capacity) +
                                                            " floats, need " + std::to_string(need));
    neilf::RenderOptions opts;
    opts.samples = samples;
    opts.sampler = sampler ? neilf::parse_sampler_kind(sampler) : neilf::SamplerKind::kFibonacci;
    opts.seed = seed;
    require(samples >= 1, "samples must be >= 1");
    const neilf::ViewRender r = neilf::render_view(scene->data, vi, model->model, opts);
    std::memcpy(rgb, r.output.data.data(), need * sizeof(float));
  });
}

neilf_status neilf_evaluate(const neilf_scene* scene, const neilf_model* model, int samples, const char* sampler,
                            uint64_t seed, const char* render_dir, char** report_json, char** table) {
  return guard([&] {
    require(scene && model, "scene and model are required");
    require(samples >= 1, "samples must be >= 1");
    neilf::EvalOptions opts;
    opts.samples = samples;
    opts.sampler = sampler ? neilf::parse_sampler_kind(sampler) : neilf::SamplerKind::kFibonacci;
    opts.seed = seed;
    if (render_dir) opts.render_dir = render_dir;
    const neilf::EvalReport report = neilf::evaluate(scene->data, model->model, opts);
    if (report_json) *report_json = dup_string(report.to_json());
    if (table) *table = dup_string(report.to_table());
  });
}

neilf_status neilf_export_brdf(const neilf_scene* scene, const neilf_model* model, const int* view_ids, int count,
                               const char* out_dir) {
  return guard([&] {
    require(scene && model && out_dir, "scene, model and output directory are required");
    require(count >= 0 && (count == 0 || view_ids), "view ids are required");
    std::vector<int> ids(view_ids, view_ids + count);
    if (ids.empty())
      for (const auto& v : scene->data.views) ids.push_back(v.id);
    neilf::export_brdf_maps(scene->data, model->model, ids, out_dir);
  });
}

neilf_status neilf_probe_light(const neilf_model* model, const neilf_scene* scene, const double x[3], int height,
                               const char* out_path) {
  return guard([&] {
    require(model && x && out_path, "model, point and output path are required");
    neilf::Vec3 p(x[0], x[1], x[2]);
    if (scene) p = scene->data.normalize(p);
    neilf::write_pfm(out_path, neilf::probe_light(model->model, p, height));
  });
}

neilf_status neilf_psnr(const float* a, const float* b, const uint8_t* mask, int width, int height, int channels,
                        int clamp, double* out) {
  return guard([&] {
    require(a && b && out, "images and output are required");
    require(width > 0 && height > 0 && channels > 0, "image dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    neilf::Image ia(width, height, channels), ib(width, height, channels);
    std::memcpy(ia.data.data(), a, n * sizeof(float));
    std::memcpy(ib.data.data(), b, n * sizeof(float));
    neilf::Image8 m;
    if (mask) {
      m = neilf::Image8(width, height, 1);
      std::memcpy(m.data.data(), mask, static_cast<std::size_t>(width) * height);
    }
    *out = neilf::psnr(ia, ib, mask ? &m : nullptr, clamp != 0);
  });
}

}  // extern "C"
