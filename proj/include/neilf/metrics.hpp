#pragma once

// Whole-view rendering, PSNR, evaluation reports, BRDF map export and incident-light probes.

#include "neilf/dataset.hpp"
#include "neilf/model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace neilf {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over the masked pixels' channels, capped at 99 dB. With `clamp` both images
// are clamped to [0, 1] first. A null mask selects every pixel.
double psnr(const Image& a, const Image& b, const Image8* mask, bool clamp = true);

struct ViewRender {
  Image hdr;     // linear radiance, 0 off the mask
  Image output;  // tone-mapped for LDR scenes, otherwise identical to hdr
};

ViewRender render_view(const SceneDataset& scene, int view_index, const Model<float>& model, const RenderOptions& opts,
                       int chunk_size = 256, int workers = 0);

struct BrdfMaps {
  Image basecolor;  // 3 channels
  Image roughness;  // 1 channel
  Image metallic;   // 1 channel
};

// BRDF field at every foreground pixel of a view; background is 0.
BrdfMaps brdf_maps(const SceneDataset& scene, int view_index, const Model<float>& model);

struct MaterialError {
  BrdfParams truth;
  std::size_t pixels = 0;
  double basecolor_mae = 0.0;  // mean over pixels and channels
  double roughness_mae = 0.0;
  double metallic_mae = 0.0;
};

struct ViewScore {
  int view_id = 0;
  double render_psnr = 0.0;            // clamped to [0, 1]
  double render_psnr_unclamped = 0.0;  // raw MSE, HDR scenes only differ from the above
  double render_psnr_display = 0.0;    // both images through the 1/2.2 display curve (HDR scenes)
  std::optional<double> basecolor_psnr;
  std::optional<double> roughness_psnr;
  std::optional<double> metallic_psnr;
};

struct EvalReport {
  ColorSpace color_space = ColorSpace::kHdr;
  int samples = 0;
  std::vector<ViewScore> views;
  double mean_render_psnr = 0.0;
  double mean_render_psnr_unclamped = 0.0;
  double mean_render_psnr_display = 0.0;
  std::optional<double> mean_basecolor_psnr;
  std::optional<double> mean_roughness_psnr;
  std::optional<double> mean_metallic_psnr;
  // Errors against ground truth grouped by distinct ground-truth material, over test views.
  std::vector<MaterialError> materials;

  std::string to_json() const;
  std::string to_table() const;
};

struct EvalOptions {
  int samples = 256;
  SamplerKind sampler = SamplerKind::kFibonacci;
  std::uint64_t seed = 0;
  int workers = 0;
  // When set, rendered test views are written as view_####_render.pfm.
  std::filesystem::path render_dir;
};

// Scores the test split; falls back to the training views when the split has no test views.
EvalReport evaluate(const SceneDataset& scene, const Model<float>& model, const EvalOptions& opts);

// Writes view_####_basecolor.pfm, _roughness.pfm and _metallic.pfm for each requested view id.
void export_brdf_maps(const SceneDataset& scene, const Model<float>& model, const std::vector<int>& view_ids,
                      const std::filesystem::path& out_dir);

// Lat-long image (width 2*height) of L(x, w) at a point in normalized coordinates. Texel (row,
// col) looks along latlong_direction((col + 0.5) / width, (row + 0.5) / height).
Image probe_light(const Model<float>& model, const Vec3& x, int height);

}  // namespace neilf
