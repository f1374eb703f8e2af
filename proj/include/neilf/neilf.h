#ifndef NEILF_NEILF_H
#define NEILF_NEILF_H

/*
 * C interface to the inverse renderer. Every fallible call returns a neilf_status; on failure the
 * message is available from neilf_last_error() on the same thread until the next failing call.
 * Handles are opaque and owned by the caller, who releases them with the matching *_free.
 * Strings returned through char** out-parameters are released with neilf_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(NEILF_BUILDING_LIBRARY)
#define NEILF_API __declspec(dllexport)
#else
#define NEILF_API __declspec(dllimport)
#endif
#else
#define NEILF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum neilf_status {
  NEILF_OK = 0,
  NEILF_ERR_INVALID_ARGUMENT = 1,
  NEILF_ERR_IO = 2,
  NEILF_ERR_FORMAT = 3,
  NEILF_ERR_VALIDATION = 4,
  NEILF_ERR_NUMERICAL = 5,
  NEILF_ERR_INTERNAL = 6
} neilf_status;

typedef struct neilf_scene neilf_scene;
typedef struct neilf_config neilf_config;
typedef struct neilf_model neilf_model;

typedef enum neilf_split { NEILF_SPLIT_TRAIN = 0, NEILF_SPLIT_TEST = 1 } neilf_split;

/* Called after every training iteration with the batch-mean total loss. */
typedef void (*neilf_progress_fn)(int iter, double lr, double total_loss, void* user);

NEILF_API const char* neilf_version(void);
NEILF_API const char* neilf_last_error(void);
NEILF_API const char* neilf_status_name(neilf_status status);
NEILF_API void neilf_string_free(char* s);

/* Dataset generation. scene_name: sphere-plane | sphere-plane-mixed | furnace; color_space: hdr | ldr. */
NEILF_API neilf_status neilf_synth(const char* scene_name, int views, int resolution, int spp, int holdout_step,
                                   const char* color_space, const char* out_dir);

/* gradient_mode: grayscale | per-channel, or NULL for grayscale. */
NEILF_API neilf_status neilf_scene_load(const char* dir, const char* gradient_mode, neilf_scene** out);
NEILF_API void neilf_scene_free(neilf_scene* scene);
NEILF_API int neilf_scene_view_count(const neilf_scene* scene);
NEILF_API int neilf_scene_is_ldr(const neilf_scene* scene);
/* Writes up to `capacity` view ids of a split; *count receives the full number. */
NEILF_API neilf_status neilf_scene_view_ids(const neilf_scene* scene, neilf_split split, int* ids, int capacity,
                                            int* count);

/* preset: paper | desk. Keys are listed by neilf_config_keys (newline separated). */
NEILF_API neilf_status neilf_config_create(const char* preset, neilf_config** out);
NEILF_API void neilf_config_free(neilf_config* cfg);
NEILF_API neilf_status neilf_config_set(neilf_config* cfg, const char* key, const char* value);
NEILF_API neilf_status neilf_config_get(const neilf_config* cfg, const char* key, char** value);
NEILF_API neilf_status neilf_config_keys(char** keys);
/* Recomputes decay milestones at 1/3 and 2/3 of total_iters. */
NEILF_API neilf_status neilf_config_proportional_milestones(neilf_config* cfg);
NEILF_API neilf_status neilf_config_validate(const neilf_config* cfg);
NEILF_API neilf_status neilf_config_to_json(const neilf_config* cfg, char** json);

/* Trains and, when out_dir is non-NULL, writes metrics.jsonl, timing.jsonl and checkpoints there.
 * `model` may be NULL; progress may be NULL. */
NEILF_API neilf_status neilf_train(const neilf_scene* scene, const neilf_config* cfg, const char* out_dir,
                                   neilf_progress_fn progress, void* user, neilf_model** model);

NEILF_API neilf_status neilf_model_load(const char* path, neilf_model** out);
NEILF_API neilf_status neilf_model_save(const neilf_model* model, const char* path);
NEILF_API void neilf_model_free(neilf_model* model);
NEILF_API uint64_t neilf_model_iteration(const neilf_model* model);
NEILF_API double neilf_model_gamma(const neilf_model* model);

/* Renders one view (by id) into rgb, which must hold width*height*3 floats. Returns the tone-mapped
 * image for LDR scenes and linear radiance otherwise; background pixels are 0. */
NEILF_API neilf_status neilf_render_view(const neilf_scene* scene, const neilf_model* model, int view_id, int samples,
                                         const char* sampler, uint64_t seed, float* rgb, size_t capacity);

/* Scores the test split. report_json and table may each be NULL. render_dir may be NULL. */
NEILF_API neilf_status neilf_evaluate(const neilf_scene* scene, const neilf_model* model, int samples,
                                      const char* sampler, uint64_t seed, const char* render_dir, char** report_json,
                                      char** table);

NEILF_API neilf_status neilf_export_brdf(const neilf_scene* scene, const neilf_model* model, const int* view_ids,
                                         int count, const char* out_dir);

/* Lat-long probe (2*height by height) at a point. When scene is non-NULL the point is in world
 * coordinates, otherwise in normalized coordinates. Written as PFM to out_path. */
NEILF_API neilf_status neilf_probe_light(const neilf_model* model, const neilf_scene* scene, const double x[3],
                                         int height, const char* out_path);

/* PSNR in dB of two same-size float images with optional 8-bit mask (NULL = all pixels). */
NEILF_API neilf_status neilf_psnr(const float* a, const float* b, const uint8_t* mask, int width, int height,
                                  int channels, int clamp, double* out);

#ifdef __cplusplus
}
#endif

#endif
