#pragma once

// Multi-view scene ingestion, pixel-batch sampling, and an analytic sphere/plane scene with a
// direct-lighting forward renderer used to produce verifiable datasets.
//
// On-disk layout of a scene directory:
//   cameras.json            color_space, bounding box, per-view intrinsics + 3x4 world-to-camera
//   split.json              {"train": [ids], "test": [ids]}
//   view_####/image.pfm     HDR radiance (little-endian PFM), or image.png (8-bit sRGB) for LDR
//   view_####/position.pfm  world-space positions (NaN off the mask)
//   view_####/normal.pfm    unit normals (NaN off the mask)
//   view_####/mask.png      8-bit foreground mask (0 / 255)
//   view_####/gt_basecolor.pfm, gt_roughness.pfm, gt_metallic.pfm   optional ground truth

#include "neilf/brdf.hpp"
#include "neilf/image_io.hpp"
#include "neilf/losses.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace neilf {

enum class ColorSpace { kHdr, kLdr };

ColorSpace parse_color_space(std::string_view name);
std::string_view to_string(ColorSpace cs);

enum class GradientMode { kGrayscale, kPerChannel };

// Pinhole camera; camera space is x right, y down, z forward.
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix<double, 3, 4> world_to_camera = Eigen::Matrix<double, 3, 4>::Zero();

  Vec3 center() const;
  // Unit world-space direction through the centre of pixel (row, col).
  Vec3 ray_direction(int row, int col) const;

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height, double fov_y_deg);
};

struct View {
  int id = 0;
  std::string name;
  Camera camera;
  Image image;          // 3 channels: linear radiance (HDR) or 8-bit values / 255 (LDR)
  Image position;       // world space, exactly as stored
  Image normal;
  Image8 mask;
  Image grad_magnitude; // 1 channel
  std::optional<Image> gt_basecolor;
  std::optional<Image> gt_roughness;
  std::optional<Image> gt_metallic;

  bool foreground(int row, int col) const { return mask.at(row, col, 0) != 0; }
  bool has_ground_truth() const { return gt_basecolor && gt_roughness && gt_metallic; }
};

struct PixelRef {
  int view = 0;  // index into SceneDataset::views
  int row = 0;
  int col = 0;
};

struct SceneDataset {
  std::filesystem::path root;
  ColorSpace color_space = ColorSpace::kHdr;
  Vec3 bbox_min = Vec3::Constant(-1.0);
  Vec3 bbox_max = Vec3::Constant(1.0);
  // normalized = (world - center) / scale, mapping the box into [-1, 1]^3.
  Vec3 center = Vec3::Zero();
  double scale = 1.0;
  std::vector<View> views;
  std::vector<int> train_views;  // indices into views
  std::vector<int> test_views;
  // Front-facing foreground pixels of the training views.
  std::vector<PixelRef> train_pixels;
  std::size_t back_facing_excluded = 0;

  int view_index(int id) const;
  Vec3 normalize(const Vec3& world) const { return (world - center) / scale; }
  Vec3 denormalize(const Vec3& x) const { return x * scale + center; }

  SurfacePoint surface_point(const PixelRef& px) const;
  Spectrum observed(const PixelRef& px) const;
};

struct LoadOptions {
  GradientMode gradient = GradientMode::kGrayscale;
  double normal_tolerance = 1e-3;
};

SceneDataset load_scene(const std::filesystem::path& dir, const LoadOptions& opts = {});

// |grad I| by central differences (one-sided at borders).
Image image_gradient_magnitude(const Image& image, GradientMode mode);

// `size` draws, uniform with replacement over the training pixels.
PixelBatch sample_batch(const SceneDataset& scene, std::size_t size, std::uint64_t rng_seed);

// ---------------------------------------------------------------------------------------------
// Analytic scenes

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  BrdfParams material;
};

// Square patch of half-width `half_extent` centred at `point`.
struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double half_extent = 1.0;
  BrdfParams material;
};

using Primitive = std::variant<Sphere, Plane>;

struct PointLight {
  Vec3 position = Vec3::Zero();
  Spectrum intensity = Spectrum::Zero();
};

// Distant lighting: uniform radiance, a procedural sky (zenith/horizon gradient, ground, and an
// exponential sun lobe), or a lat-long image.
struct Environment {
  enum class Kind { kUniform, kSky, kLatLong };
  Kind kind = Kind::kUniform;
  Spectrum uniform = Spectrum::Ones();
  Spectrum zenith = Spectrum(0.18, 0.24, 0.34);
  Spectrum horizon = Spectrum(0.34, 0.32, 0.29);
  Spectrum ground = Spectrum(0.1, 0.09, 0.08);
  Vec3 sun_direction = Vec3(0.5, 0.3, 0.8).normalized();
  Spectrum sun = Spectrum(1.1, 1.0, 0.85);
  double sun_sharpness = 12.0;
  Image latlong;

  Spectrum eval(const Vec3& dir) const;
};

struct Hit {
  double t = 0.0;
  Vec3 position;
  Vec3 normal;  // faces the incoming ray
  int primitive = -1;
};

struct AnalyticScene {
  std::vector<Primitive> primitives;
  Environment environment;
  std::vector<PointLight> lights;
  ColorSpace color_space = ColorSpace::kHdr;
  FresnelMode fresnel = FresnelMode::kPrinted;
  // Off for pure-Lambertian reference scenes such as the furnace.
  bool specular = true;
  Vec3 target = Vec3::Zero();
  double camera_distance = 3.5;
  double fov_y_deg = 40.0;

  void validate() const;
  std::optional<Hit> intersect(const Vec3& origin, const Vec3& dir, double t_max = 1e30) const;
  bool occluded(const Vec3& origin, const Vec3& dir, double t_max = 1e30) const;
  const BrdfParams& material(int primitive) const;
  // Axis-aligned bounds of every primitive, padded by 1%.
  void bounds(Vec3& lo, Vec3& hi) const;
};

// Built-in scenes: "sphere-plane" (environment only), "sphere-plane-mixed" (environment plus two
// point lights), "furnace" (Lambertian plane under uniform unit light).
AnalyticScene make_scene(std::string_view name);

struct OracleImages {
  Image hdr;
  Image position;
  Image normal;
  Image8 mask;
  Image basecolor;
  Image roughness;
  Image metallic;
};

// Direct lighting with exact shadow rays: environment integrated over `spp` Fibonacci directions
// about the normal, plus inverse-square point lights.
OracleImages oracle_render(const AnalyticScene& scene, const Camera& camera, int spp);

// Radiance leaving a surface point toward `wo`, same estimator as oracle_render.
Spectrum oracle_shade(const AnalyticScene& scene, const Vec3& position, const Vec3& normal, const Vec3& wo,
                      const BrdfParams& material, int spp);

struct GenerateOptions {
  int views = 12;
  int resolution = 64;
  int holdout_step = 4;  // every k-th view goes to the test split
  int spp = 512;
};

// Cameras on three loops at altitudes 0, 22.5 and 45 degrees around the scene target.
std::vector<Camera> orbit_cameras(const AnalyticScene& scene, int count, int resolution);

void generate_dataset(const AnalyticScene& scene, const GenerateOptions& opts, const std::filesystem::path& out_dir);

// sRGB transfer curve, used to quantize LDR images.
double srgb_encode(double linear);

}  // namespace neilf
