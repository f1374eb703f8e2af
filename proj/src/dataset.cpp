#include "neilf/dataset.hpp"

#include "neilf/parallel.hpp"
#include "neilf/sampling.hpp"

#include "json.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace neilf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

std::string view_dir_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%04d", id);
  return buf;
}

std::string pixel_str(const fs::path& file, int row, int col) {
  std::ostringstream os;
  os << file.string() << " pixel (row " << row << ", col " << col << ")";
  return os.str();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Error::Kind::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(Error::Kind::kFormat, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(Error::Kind::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) fail(Error::Kind::kIo, "write failed: " + path.string());
}

Vec3 json_vec3(const json& j, const fs::path& file, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    fail(Error::Kind::kFormat, file.string() + ": '" + key + "' must be a 3-element array");
  return Vec3(j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>());
}

json camera_to_json(const Camera& c) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    json row = json::array();
    for (int k = 0; k < 4; ++k) row.push_back(c.world_to_camera(r, k));
    rows.push_back(row);
  }
  return json{{"width", c.width}, {"height", c.height}, {"fx", c.fx},       {"fy", c.fy},
              {"cx", c.cx},       {"cy", c.cy},         {"world_to_camera", rows}};
}

Camera camera_from_json(const json& j, const fs::path& file) {
  Camera c;
  try {
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    const json& m = j.at("world_to_camera");
    if (!m.is_array() || m.size() != 3) fail(Error::Kind::kFormat, file.string() + ": world_to_camera must be 3x4");
    for (int r = 0; r < 3; ++r) {
      if (!m[r].is_array() || m[r].size() != 4)
        fail(Error::Kind::kFormat, file.string() + ": world_to_camera must be 3x4");
      for (int k = 0; k < 4; ++k) c.world_to_camera(r, k) = m[r][k].get<double>();
    }
  } catch (const json::exception& e) {
    fail(Error::Kind::kFormat, file.string() + ": bad camera record: " + e.what());
  }
  if (c.width <= 0 || c.height <= 0 || !(c.fx > 0) || !(c.fy > 0))
    fail(Error::Kind::kValidation, file.string() + ": camera needs positive resolution and focal lengths");
  return c;
}

void require_shape(const Image& img, int w, int h, int channels, const fs::path& path) {
  if (img.width != w || img.height != h)
    fail(Error::Kind::kValidation, path.string() + ": resolution " + std::to_string(img.width) + "x" +
                                       std::to_string(img.height) + " does not match camera " + std::to_string(w) +
                                       "x" + std::to_string(h));
  if (img.channels != channels)
    fail(Error::Kind::kValidation,
         path.string() + ": expected " + std::to_string(channels) + " channels, got " + std::to_string(img.channels));
}

fs::path require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) fail(Error::Kind::kIo, "missing file " + path.string());
  return path;
}

std::optional<Image> optional_map(const fs::path& path, const Camera& cam, int channels) {
  if (!fs::exists(path)) return std::nullopt;
  Image img = read_pfm(path);
  require_shape(img, cam.width, cam.height, channels, path);
  return img;
}

std::vector<int> json_ids(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key) || !j[key].is_array()) fail(Error::Kind::kFormat, file.string() + ": missing '" + key + "' list");
  std::vector<int> out;
  for (const auto& v : j[key]) out.push_back(v.get<int>());
  return out;
}

}  // namespace

ColorSpace parse_color_space(std::string_view name) {
  if (name == "hdr" || name == "HDR") return ColorSpace::kHdr;
  if (name == "ldr" || name == "LDR") return ColorSpace::kLdr;
  fail(Error::Kind::kInvalidArgument, "unknown color space '" + std::string(name) + "' (expected hdr or ldr)");
}

std::string_view to_string(ColorSpace cs) { return cs == ColorSpace::kHdr ? "hdr" : "ldr"; }

Vec3 Camera::center() const {
  const Eigen::Matrix3d r = world_to_camera.leftCols<3>();
  return -r.transpose() * world_to_camera.col(3);
}

Vec3 Camera::ray_direction(int row, int col) const {
  const Vec3 local((col + 0.5 - cx) / fx, (row + 0.5 - cy) / fy, 1.0);
  const Eigen::Matrix3d r = world_to_camera.leftCols<3>();
  return (r.transpose() * local).normalized();
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double fov_y_deg) {
  const Vec3 f = (target - eye).normalized();
  Vec3 right = f.cross(up);
  if (right.norm() < 1e-9) right = f.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = f.cross(right);
  Camera c;
  c.width = width;
  c.height = height;
  c.fy = 0.5 * height / std::tan(0.5 * fov_y_deg * kPi / 180.0);
  c.fx = c.fy;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = f.transpose();
  c.world_to_camera.leftCols<3>() = r;
  c.world_to_camera.col(3) = -r * eye;
  return c;
}

int SceneDataset::view_index(int id) const {
  for (std::size_t i = 0; i < views.size(); ++i)
    if (views[i].id == id) return static_cast<int>(i);
  fail(Error::Kind::kInvalidArgument, "no view with id " + std::to_string(id));
}

SurfacePoint SceneDataset::surface_point(const PixelRef& px) const {
  const View& v = views[static_cast<std::size_t>(px.view)];
  const Vec3 world(v.position.at(px.row, px.col, 0), v.position.at(px.row, px.col, 1),
                   v.position.at(px.row, px.col, 2));
  const Vec3 n(v.normal.at(px.row, px.col, 0), v.normal.at(px.row, px.col, 1), v.normal.at(px.row, px.col, 2));
  SurfacePoint pt;
  pt.x = normalize(world);
  pt.n = n.normalized();
  pt.wo = (v.camera.center() - world).normalized();
  pt.pixel = PixelId{v.id, px.row, px.col};
  return pt;
}

Spectrum SceneDataset::observed(const PixelRef& px) const {
  const View& v = views[static_cast<std::size_t>(px.view)];
  return Spectrum(v.image.at(px.row, px.col, 0), v.image.at(px.row, px.col, 1), v.image.at(px.row, px.col, 2));
}

Image image_gradient_magnitude(const Image& image, GradientMode mode) {
  const int w = image.width;
  const int h = image.height;
  Image out(w, h, 1);
  if (w == 0 || h == 0) return out;
  auto value = [&](int row, int col, int ch) -> double {
    if (mode == GradientMode::kGrayscale && image.channels == 3)
      return 0.2126 * image.at(row, col, 0) + 0.7152 * image.at(row, col, 1) + 0.0722 * image.at(row, col, 2);
    return image.at(row, col, ch);
  };
  const int planes = (mode == GradientMode::kGrayscale) ? 1 : image.channels;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const int c0 = std::max(col - 1, 0), c1 = std::min(col + 1, w - 1);
      const int r0 = std::max(row - 1, 0), r1 = std::min(row + 1, h - 1);
      double sq = 0.0;
      for (int ch = 0; ch < planes; ++ch) {
        const double gx = (c1 > c0) ? (value(row, c1, ch) - value(row, c0, ch)) / (c1 - c0) : 0.0;
        const double gy = (r1 > r0) ? (value(r1, col, ch) - value(r0, col, ch)) / (r1 - r0) : 0.0;
        sq += gx * gx + gy * gy;
      }
      out.at(row, col, 0) = static_cast<float>(std::sqrt(sq));
    }
  }
  return out;
}

SceneDataset load_scene(const fs::path& dir, const LoadOptions& opts) {
  SceneDataset scene;
  scene.root = dir;
  const fs::path cam_path = require_file(dir / "cameras.json");
  const json cams = read_json(cam_path);

  try {
    scene.color_space = parse_color_space(cams.at("color_space").get<std::string>());
  } catch (const json::exception& e) {
    fail(Error::Kind::kFormat, cam_path.string() + ": missing color_space: " + e.what());
  }
  if (!cams.contains("bbox")) fail(Error::Kind::kFormat, cam_path.string() + ": missing bbox");
  scene.bbox_min = json_vec3(cams["bbox"], cam_path, "min");
  scene.bbox_max = json_vec3(cams["bbox"], cam_path, "max");
  if (!((scene.bbox_max - scene.bbox_min).array() > 0.0).all())
    fail(Error::Kind::kValidation, cam_path.string() + ": bbox max must exceed min on every axis");
  scene.center = 0.5 * (scene.bbox_min + scene.bbox_max);
  scene.scale = 0.5 * (scene.bbox_max - scene.bbox_min).maxCoeff();

  if (!cams.contains("views") || !cams["views"].is_array() || cams["views"].empty())
    fail(Error::Kind::kFormat, cam_path.string() + ": 'views' must be a nonempty array");

  const double box_tol = 1e-4 * scene.scale;
  std::set<int> seen;
  for (const json& jv : cams["views"]) {
    View v;
    try {
      v.id = jv.at("id").get<int>();
    } catch (const json::exception& e) {
      fail(Error::Kind::kFormat, cam_path.string() + ": view without id: " + e.what());
    }
    if (!seen.insert(v.id).second)
      fail(Error::Kind::kValidation, cam_path.string() + ": duplicate view id " + std::to_string(v.id));
    v.name = view_dir_name(v.id);
    v.camera = camera_from_json(jv, cam_path);
    const fs::path vdir = dir / v.name;
    const int w = v.camera.width, h = v.camera.height;

    if (scene.color_space == ColorSpace::kHdr) {
      const fs::path p = require_file(vdir / "image.pfm");
      v.image = read_pfm(p);
      require_shape(v.image, w, h, 3, p);
    } else {
      const fs::path p = require_file(vdir / "image.png");
      const Image8 img8 = read_png(p, 3);
      if (img8.width != w || img8.height != h)
        fail(Error::Kind::kValidation, p.string() + ": resolution does not match camera");
      v.image = Image(w, h, 3);
      for (std::size_t i = 0; i < img8.data.size(); ++i) v.image.data[i] = static_cast<float>(img8.data[i]) / 255.0f;
    }
    const fs::path pos_path = require_file(vdir / "position.pfm");
    const fs::path nrm_path = require_file(vdir / "normal.pfm");
    const fs::path mask_path = require_file(vdir / "mask.png");
    v.position = read_pfm(pos_path);
    require_shape(v.position, w, h, 3, pos_path);
    v.normal = read_pfm(nrm_path);
    require_shape(v.normal, w, h, 3, nrm_path);
    v.mask = read_png(mask_path, 1);
    if (v.mask.width != w || v.mask.height != h)
      fail(Error::Kind::kValidation, mask_path.string() + ": resolution does not match camera");
    v.gt_basecolor = optional_map(vdir / "gt_basecolor.pfm", v.camera, 3);
    v.gt_roughness = optional_map(vdir / "gt_roughness.pfm", v.camera, 1);
    v.gt_metallic = optional_map(vdir / "gt_metallic.pfm", v.camera, 1);

    for (int row = 0; row < h; ++row) {
      for (int col = 0; col < w; ++col) {
        if (!v.foreground(row, col)) continue;
        const Vec3 x(v.position.at(row, col, 0), v.position.at(row, col, 1), v.position.at(row, col, 2));
        const Vec3 n(v.normal.at(row, col, 0), v.normal.at(row, col, 1), v.normal.at(row, col, 2));
        if (!x.allFinite()) fail(Error::Kind::kValidation, "non-finite position at " + pixel_str(pos_path, row, col));
        if (((x - scene.bbox_min).array() < -box_tol).any() || ((x - scene.bbox_max).array() > box_tol).any())
          fail(Error::Kind::kValidation, "position outside bounding box at " + pixel_str(pos_path, row, col));
        if (!n.allFinite() || std::abs(n.norm() - 1.0) > opts.normal_tolerance)
          fail(Error::Kind::kValidation, "non-unit normal at " + pixel_str(nrm_path, row, col));
        for (int ch = 0; ch < 3; ++ch) {
          const float val = v.image.at(row, col, ch);
          if (!std::isfinite(val) || val < 0.0f)
            fail(Error::Kind::kValidation, "negative or non-finite radiance at " +
                                               pixel_str(vdir / (scene.color_space == ColorSpace::kHdr ? "image.pfm"
                                                                                                        : "image.png"),
                                                         row, col));
        }
      }
    }
    v.grad_magnitude = image_gradient_magnitude(v.image, opts.gradient);
    scene.views.push_back(std::move(v));
  }

  const fs::path split_path = require_file(dir / "split.json");
  const json split = read_json(split_path);
  for (int id : json_ids(split, "train", split_path)) scene.train_views.push_back(scene.view_index(id));
  for (int id : json_ids(split, "test", split_path)) scene.test_views.push_back(scene.view_index(id));
  if (scene.train_views.empty()) fail(Error::Kind::kValidation, split_path.string() + ": no training views");

  for (int vi : scene.train_views) {
    const View& v = scene.views[static_cast<std::size_t>(vi)];
    for (int row = 0; row < v.camera.height; ++row) {
      for (int col = 0; col < v.camera.width; ++col) {
        if (!v.foreground(row, col)) continue;
        const PixelRef px{vi, row, col};
        const SurfacePoint pt = scene.surface_point(px);
        if (pt.n.dot(pt.wo) <= 0.0) {
          ++scene.back_facing_excluded;
          continue;
        }
        scene.train_pixels.push_back(px);
      }
    }
  }
  return scene;
}

PixelBatch sample_batch(const SceneDataset& scene, std::size_t size, std::uint64_t rng_seed) {
  if (size == 0) fail(Error::Kind::kInvalidArgument, "batch size must be at least 1");
  if (scene.train_pixels.empty()) fail(Error::Kind::kValidation, "scene has no foreground training pixels");
  Rng rng(rng_seed);
  PixelBatch batch;
  batch.entries.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const PixelRef& px = scene.train_pixels[rng.below(scene.train_pixels.size())];
    const View& v = scene.views[static_cast<std::size_t>(px.view)];
    PixelSample s;
    s.point = scene.surface_point(px);
    s.observed = scene.observed(px);
    s.grad_magnitude = v.grad_magnitude.at(px.row, px.col, 0);
    batch.entries.push_back(s);
  }
  return batch;
}

// ---------------------------------------------------------------------------------------------

Spectrum Environment::eval(const Vec3& dir) const {
  switch (kind) {
    case Kind::kUniform:
      return uniform;
    case Kind::kSky: {
      Spectrum base;
      if (dir.z() >= 0.0) {
        const double t = std::sqrt(dir.z());
        base = horizon * (1.0 - t) + zenith * t;
      } else {
        base = ground;
      }
      return base + sun * std::exp(sun_sharpness * (dir.dot(sun_direction) - 1.0));
    }
    case Kind::kLatLong: {
      if (latlong.width == 0) return Spectrum::Zero();
      const EnvTap tap = env_bilinear_taps(dir, latlong.width, latlong.height);
      Spectrum out = Spectrum::Zero();
      for (int k = 0; k < 4; ++k) {
        const int idx = tap.index[static_cast<std::size_t>(k)];
        const int row = idx / latlong.width, col = idx % latlong.width;
        for (int c = 0; c < 3; ++c) out(c) += tap.weight[static_cast<std::size_t>(k)] * latlong.at(row, col, c);
      }
      return out;
    }
  }
  return Spectrum::Zero();
}

void AnalyticScene::validate() const {
  if (primitives.empty()) fail(Error::Kind::kInvalidArgument, "scene has no primitives");
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const std::string tag = "primitive " + std::to_string(i);
    if (const auto* s = std::get_if<Sphere>(&primitives[i])) {
      if (!(s->radius > 0.0) || !s->center.allFinite()) fail(Error::Kind::kInvalidArgument, tag + ": degenerate sphere");
      if (!s->material.valid()) fail(Error::Kind::kInvalidArgument, tag + ": material out of range");
    } else {
      const auto& p = std::get<Plane>(primitives[i]);
      if (!(p.half_extent > 0.0) || std::abs(p.normal.norm() - 1.0) > 1e-9 || !p.point.allFinite())
        fail(Error::Kind::kInvalidArgument, tag + ": degenerate plane");
      if (!p.material.valid()) fail(Error::Kind::kInvalidArgument, tag + ": material out of range");
    }
  }
  for (const auto& l : lights)
    if (!l.position.allFinite() || (l.intensity.array() < 0.0).any() || !l.intensity.allFinite())
      fail(Error::Kind::kInvalidArgument, "point light intensity must be finite and nonnegative");
}

std::optional<Hit> AnalyticScene::intersect(const Vec3& origin, const Vec3& dir, double t_max) const {
  constexpr double kTMin = 1e-7;
  std::optional<Hit> best;
  double best_t = t_max;
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    if (const auto* s = std::get_if<Sphere>(&primitives[i])) {
      const Vec3 oc = origin - s->center;
      const double b = oc.dot(dir);
      const double c = oc.squaredNorm() - s->radius * s->radius;
      const double disc = b * b - c;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      double t = -b - sq;
      if (t <= kTMin) t = -b + sq;
      if (t <= kTMin || t >= best_t) continue;
      best_t = t;
      Hit h;
      h.t = t;
      h.position = origin + t * dir;
      h.normal = (h.position - s->center).normalized();
      if (h.normal.dot(dir) > 0.0) h.normal = -h.normal;
      h.primitive = static_cast<int>(i);
      best = h;
    } else {
      const auto& p = std::get<Plane>(primitives[i]);
      const double denom = p.normal.dot(dir);
      if (std::abs(denom) < 1e-12) continue;
      const double t = p.normal.dot(p.point - origin) / denom;
      if (t <= kTMin || t >= best_t) continue;
      const Vec3 x = origin + t * dir;
      const TangentFrame f = build_tangent_frame(p.normal);
      const Vec3 d = x - p.point;
      if (std::abs(d.dot(f.t)) > p.half_extent || std::abs(d.dot(f.bt)) > p.half_extent) continue;
      best_t = t;
      Hit h;
      h.t = t;
      h.position = x;
      h.normal = denom < 0.0 ? p.normal : Vec3(-p.normal);
      h.primitive = static_cast<int>(i);
      best = h;
    }
  }
  return best;
}

bool AnalyticScene::occluded(const Vec3& origin, const Vec3& dir, double t_max) const {
  return intersect(origin, dir, t_max).has_value();
}

const BrdfParams& AnalyticScene::material(int primitive) const {
  const Primitive& p = primitives.at(static_cast<std::size_t>(primitive));
  if (const auto* s = std::get_if<Sphere>(&p)) return s->material;
  return std::get<Plane>(p).material;
}

void AnalyticScene::bounds(Vec3& lo, Vec3& hi) const {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const Primitive& prim : primitives) {
    if (const auto* s = std::get_if<Sphere>(&prim)) {
      lo = lo.cwiseMin(s->center - Vec3::Constant(s->radius));
      hi = hi.cwiseMax(s->center + Vec3::Constant(s->radius));
    } else {
      const auto& p = std::get<Plane>(prim);
      const TangentFrame f = build_tangent_frame(p.normal);
      for (double a : {-1.0, 1.0})
        for (double b : {-1.0, 1.0}) {
          const Vec3 corner = p.point + p.half_extent * (a * f.t + b * f.bt);
          lo = lo.cwiseMin(corner);
          hi = hi.cwiseMax(corner);
        }
    }
  }
  const Vec3 pad = 0.01 * (hi - lo).cwiseMax(Vec3::Constant(1e-3));
  lo -= pad;
  hi += pad;
}

AnalyticScene make_scene(std::string_view name) {
  AnalyticScene scene;
  BrdfParams sphere_mat;
  sphere_mat.base_color = Spectrum(0.8, 0.1, 0.1);
  sphere_mat.roughness = 0.35;
  sphere_mat.metallic = 0.0;
  BrdfParams plane_mat;
  plane_mat.base_color = Spectrum(0.45, 0.5, 0.55);
  plane_mat.roughness = 0.8;
  plane_mat.metallic = 0.0;

  if (name == "sphere-plane" || name == "sphere-plane-mixed") {
    scene.primitives.push_back(Sphere{Vec3(0.0, 0.0, 0.5), 0.5, sphere_mat});
    scene.primitives.push_back(Plane{Vec3::Zero(), Vec3::UnitZ(), 1.0, plane_mat});
    scene.environment.kind = Environment::Kind::kSky;
    scene.target = Vec3(0.0, 0.0, 0.3);
    if (name == "sphere-plane-mixed") {
      // Dimmer sky so that the near-field lights dominate the shading variation.
      scene.environment.zenith *= 0.4;
      scene.environment.horizon *= 0.4;
      scene.environment.ground *= 0.4;
      scene.environment.sun *= 0.3;
      scene.lights.push_back(PointLight{Vec3(0.9, -0.6, 1.1), Spectrum(0.8, 0.7, 0.55)});
      scene.lights.push_back(PointLight{Vec3(-0.8, 0.7, 0.8), Spectrum(0.3, 0.45, 0.75)});
    }
    return scene;
  }
  if (name == "furnace") {
    BrdfParams lambert;
    lambert.base_color = Spectrum::Constant(0.5);
    lambert.roughness = 1.0;
    lambert.metallic = 0.0;
    scene.primitives.push_back(Plane{Vec3::Zero(), Vec3::UnitZ(), 1.0, lambert});
    scene.environment.kind = Environment::Kind::kUniform;
    scene.environment.uniform = Spectrum::Ones();
    scene.specular = false;
    scene.target = Vec3::Zero();
    return scene;
  }
  fail(Error::Kind::kInvalidArgument,
       "unknown scene '" + std::string(name) + "' (expected sphere-plane, sphere-plane-mixed or furnace)");
}

Spectrum oracle_shade(const AnalyticScene& scene, const Vec3& position, const Vec3& normal, const Vec3& wo,
                      const BrdfParams& material, int spp) {
  BrdfOptions bopts;
  bopts.fresnel = scene.fresnel;
  bopts.specular = scene.specular;
  const double eps = 1e-5 * (1.0 + position.norm());
  const Vec3 origin = position + eps * normal;

  const DirectionSet set = fibonacci_hemisphere(spp, build_tangent_frame(normal));
  Spectrum acc = Spectrum::Zero();
  for (const Vec3& wi : set.directions) {
    const double cos_i = wi.dot(normal);
    if (cos_i <= 0.0 || scene.occluded(origin, wi)) continue;
    const auto f = eval_brdf(ShadingVectors<double>{wo, wi, normal}, material, bopts);
    acc += (f.array() * scene.environment.eval(wi).array()).matrix() * cos_i;
  }
  acc *= set.solid_angle;

  for (const PointLight& light : scene.lights) {
    const Vec3 to_light = light.position - position;
    const double dist = to_light.norm();
    const Vec3 wi = to_light / dist;
    const double cos_i = wi.dot(normal);
    if (cos_i <= 0.0 || scene.occluded(origin, wi, dist)) continue;
    const auto f = eval_brdf(ShadingVectors<double>{wo, wi, normal}, material, bopts);
    acc += (f.array() * light.intensity.array()).matrix() * (cos_i / (dist * dist));
  }
  return acc;
}

OracleImages oracle_render(const AnalyticScene& scene, const Camera& camera, int spp) {
  if (spp < 1) fail(Error::Kind::kInvalidArgument, "spp must be at least 1");
  scene.validate();
  const int w = camera.width, h = camera.height;
  OracleImages out;
  out.hdr = Image(w, h, 3, 0.0f);
  out.position = Image(w, h, 3, kNaN);
  out.normal = Image(w, h, 3, kNaN);
  out.mask = Image8(w, h, 1, 0);
  out.basecolor = Image(w, h, 3, 0.0f);
  out.roughness = Image(w, h, 1, 0.0f);
  out.metallic = Image(w, h, 1, 0.0f);
  const Vec3 eye = camera.center();

  parallel_for(static_cast<std::size_t>(w) * h, [&](std::size_t idx) {
    const int row = static_cast<int>(idx / static_cast<std::size_t>(w));
    const int col = static_cast<int>(idx % static_cast<std::size_t>(w));
    const Vec3 dir = camera.ray_direction(row, col);
    const auto hit = scene.intersect(eye, dir);
    if (!hit) return;
    // Geometry is stored in single precision; shade exactly what the maps will hold.
    const Vec3 x = hit->position.cast<float>().cast<double>();
    const Vec3 n = hit->normal.cast<float>().cast<double>().normalized();
    const BrdfParams& mat = scene.material(hit->primitive);
    const Spectrum radiance = oracle_shade(scene, x, n, (eye - x).normalized(), mat, spp);
    out.mask.at(row, col, 0) = 255;
    for (int c = 0; c < 3; ++c) {
      out.hdr.at(row, col, c) = static_cast<float>(radiance(c));
      out.position.at(row, col, c) = static_cast<float>(hit->position(c));
      out.normal.at(row, col, c) = static_cast<float>(hit->normal(c));
      out.basecolor.at(row, col, c) = static_cast<float>(mat.base_color(c));
    }
    out.roughness.at(row, col, 0) = static_cast<float>(mat.roughness);
    out.metallic.at(row, col, 0) = static_cast<float>(mat.metallic);
  });
  return out;
}

std::vector<Camera> orbit_cameras(const AnalyticScene& scene, int count, int resolution) {
  if (count < 2) fail(Error::Kind::kInvalidArgument, "need at least 2 cameras");
  if (resolution < 1) fail(Error::Kind::kInvalidArgument, "resolution must be positive");
  constexpr double kAltitudes[3] = {0.0, 22.5, 45.0};
  std::vector<Camera> cams;
  for (int loop = 0; loop < 3; ++loop) {
    const int n = count / 3 + (loop < count % 3 ? 1 : 0);
    const double alt = kAltitudes[loop] * kPi / 180.0;
    for (int j = 0; j < n; ++j) {
      // Loops are staggered so that no two cameras share an azimuth.
      const double az = kTwoPi * (j + loop / 3.0) / n;
      const Vec3 offset(std::cos(alt) * std::cos(az), std::cos(alt) * std::sin(az), std::sin(alt));
      cams.push_back(Camera::look_at(scene.target + scene.camera_distance * offset, scene.target, Vec3::UnitZ(),
                                     resolution, resolution, scene.fov_y_deg));
    }
  }
  return cams;
}

double srgb_encode(double linear) {
  const double v = std::clamp(linear, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

void generate_dataset(const AnalyticScene& scene, const GenerateOptions& opts, const fs::path& out_dir) {
  if (opts.holdout_step < 2) fail(Error::Kind::kInvalidArgument, "holdout step must be at least 2");
  scene.validate();
  const std::vector<Camera> cams = orbit_cameras(scene, opts.views, opts.resolution);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(Error::Kind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  Vec3 lo, hi;
  scene.bounds(lo, hi);
  json views = json::array();
  json train = json::array(), test = json::array();
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const int id = static_cast<int>(i);
    const OracleImages img = oracle_render(scene, cams[i], opts.spp);
    const fs::path vdir = out_dir / view_dir_name(id);
    fs::create_directories(vdir, ec);
    if (ec) fail(Error::Kind::kIo, "cannot create " + vdir.string() + ": " + ec.message());
    if (scene.color_space == ColorSpace::kHdr) {
      write_pfm(vdir / "image.pfm", img.hdr);
    } else {
      Image8 ldr(img.hdr.width, img.hdr.height, 3);
      for (std::size_t k = 0; k < img.hdr.data.size(); ++k)
        ldr.data[k] = static_cast<std::uint8_t>(std::lround(255.0 * srgb_encode(img.hdr.data[k])));
      write_png(vdir / "image.png", ldr);
    }
    write_pfm(vdir / "position.pfm", img.position);
    write_pfm(vdir / "normal.pfm", img.normal);
    write_png(vdir / "mask.png", img.mask);
    write_pfm(vdir / "gt_basecolor.pfm", img.basecolor);
    write_pfm(vdir / "gt_roughness.pfm", img.roughness);
    write_pfm(vdir / "gt_metallic.pfm", img.metallic);

    json jv = camera_to_json(cams[i]);
    jv["id"] = id;
    views.push_back(jv);
    (id % opts.holdout_step == opts.holdout_step - 1 ? test : train).push_back(id);
  }
  json cams_json{{"color_space", std::string(to_string(scene.color_space))},
                 {"bbox", {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}}},
                 {"views", views}};
  write_json(out_dir / "cameras.json", cams_json);
  write_json(out_dir / "split.json", json{{"train", train}, {"test", test}});
}

}  // namespace neilf
