#include "neilf/metrics.hpp"

#include "neilf/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace neilf {

namespace fs = std::filesystem;

double psnr(const Image& a, const Image& b, const Image8* mask, bool clamp) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    fail(Error::Kind::kInvalidArgument, "psnr: image shapes differ");
  if (mask && (mask->width != a.width || mask->height != a.height))
    fail(Error::Kind::kInvalidArgument, "psnr: mask shape differs");
  double sum = 0.0;
  std::size_t count = 0;
  for (int row = 0; row < a.height; ++row) {
    for (int col = 0; col < a.width; ++col) {
      if (mask && mask->at(row, col, 0) == 0) continue;
      for (int c = 0; c < a.channels; ++c) {
        double x = a.at(row, col, c), y = b.at(row, col, c);
        if (clamp) {
          x = std::clamp(x, 0.0, 1.0);
          y = std::clamp(y, 0.0, 1.0);
        }
        sum += (x - y) * (x - y);
        ++count;
      }
    }
  }
  if (count == 0) fail(Error::Kind::kInvalidArgument, "psnr: empty mask");
  const double mse = sum / static_cast<double>(count);
  if (!std::isfinite(mse)) fail(Error::Kind::kNumerical, "psnr: non-finite error");
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

namespace {

std::vector<PixelRef> foreground(const SceneDataset& scene, int vi) {
  const View& v = scene.views.at(static_cast<std::size_t>(vi));
  std::vector<PixelRef> out;
  for (int row = 0; row < v.camera.height; ++row)
    for (int col = 0; col < v.camera.width; ++col)
      if (v.foreground(row, col)) out.push_back({vi, row, col});
  return out;
}

std::string view_prefix(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%04d", id);
  return buf;
}

Image display_curve(const Image& img) {
  Image out = img;
  for (float& v : out.data) v = static_cast<float>(std::pow(std::clamp(static_cast<double>(v), 0.0, 1.0), 1.0 / 2.2));
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

ViewRender render_view(const SceneDataset& scene, int view_index, const Model<float>& model, const RenderOptions& opts,
                       int chunk_size, int workers) {
  const View& v = scene.views.at(static_cast<std::size_t>(view_index));
  const std::vector<PixelRef> pixels = foreground(scene, view_index);
  std::vector<SurfacePoint> points;
  points.reserve(pixels.size());
  for (const PixelRef& px : pixels) points.push_back(scene.surface_point(px));

  RenderOptions ro = opts;
  ro.brdf.fresnel = model.fresnel;
  const bool ldr = scene.color_space == ColorSpace::kLdr;
  ViewRender out{Image(v.camera.width, v.camera.height, 3), Image(v.camera.width, v.camera.height, 3)};
  const std::size_t chunk = static_cast<std::size_t>(std::max(chunk_size, 1));
  const std::size_t chunks = (points.size() + chunk - 1) / chunk;
  parallel_for(
      chunks,
      [&](std::size_t c) {
        const std::size_t begin = c * chunk;
        const std::size_t count = std::min(chunk, points.size() - begin);
        Tape<float> tape;
        const auto r = render_points(tape, model, std::span<const SurfacePoint>(points.data() + begin, count), ro, ldr,
                                     false);
        const Matrix<float>& hdr = tape.value(r.hdr);
        const Matrix<float>& shown = tape.value(r.output);
        for (std::size_t i = 0; i < count; ++i) {
          const PixelRef& px = pixels[begin + i];
          for (int ch = 0; ch < 3; ++ch) {
            out.hdr.at(px.row, px.col, ch) = hdr(static_cast<Eigen::Index>(i), ch);
            out.output.at(px.row, px.col, ch) = shown(static_cast<Eigen::Index>(i), ch);
          }
        }
      },
      workers > 0 ? workers : default_worker_count());
  return out;
}

BrdfMaps brdf_maps(const SceneDataset& scene, int view_index, const Model<float>& model) {
  const View& v = scene.views.at(static_cast<std::size_t>(view_index));
  const std::vector<PixelRef> pixels = foreground(scene, view_index);
  BrdfMaps maps{Image(v.camera.width, v.camera.height, 3), Image(v.camera.width, v.camera.height, 1),
                Image(v.camera.width, v.camera.height, 1)};
  if (pixels.empty()) return maps;
  Matrix<float> pos(static_cast<Eigen::Index>(pixels.size()), 3);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pos.row(static_cast<Eigen::Index>(i)) = scene.surface_point(pixels[i]).x.cast<float>().transpose();
  Tape<float> tape;
  const auto out = model.brdf.eval(tape, tape.constant(std::move(pos)), false);
  const Matrix<float>& p = tape.value(out.params);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const PixelRef& px = pixels[i];
    for (int c = 0; c < 3; ++c) maps.basecolor.at(px.row, px.col, c) = p(r, kBaseColorCol + c);
    maps.roughness.at(px.row, px.col, 0) = p(r, kRoughnessCol);
    maps.metallic.at(px.row, px.col, 0) = p(r, kMetallicCol);
  }
  return maps;
}

EvalReport evaluate(const SceneDataset& scene, const Model<float>& model, const EvalOptions& opts) {
  EvalReport report;
  report.color_space = scene.color_space;
  report.samples = opts.samples;
  RenderOptions ro;
  ro.sampler = opts.sampler;
  ro.samples = opts.samples;
  ro.seed = opts.seed;
  const std::vector<int>& ids = scene.test_views.empty() ? scene.train_views : scene.test_views;
  const bool hdr = scene.color_space == ColorSpace::kHdr;

  struct Acc {
    BrdfParams truth;
    std::size_t n = 0;
    double b = 0.0, r = 0.0, m = 0.0;
  };
  std::map<std::array<float, 5>, Acc> groups;
  std::vector<double> rp, ru, rd, bp, rgp, mp;

  for (int vi : ids) {
    const View& v = scene.views[static_cast<std::size_t>(vi)];
    const ViewRender rendered = render_view(scene, vi, model, ro, 256, opts.workers);
    ViewScore s;
    s.view_id = v.id;
    s.render_psnr = psnr(rendered.output, v.image, &v.mask, true);
    s.render_psnr_unclamped = psnr(rendered.output, v.image, &v.mask, false);
    s.render_psnr_display =
        hdr ? psnr(display_curve(rendered.output), display_curve(v.image), &v.mask, false) : s.render_psnr;
    if (!opts.render_dir.empty()) {
      fs::create_directories(opts.render_dir);
      write_pfm(opts.render_dir / (view_prefix(v.id) + "_render.pfm"), rendered.output);
    }
    if (v.has_ground_truth()) {
      const BrdfMaps maps = brdf_maps(scene, vi, model);
      s.basecolor_psnr = psnr(maps.basecolor, *v.gt_basecolor, &v.mask, true);
      s.roughness_psnr = psnr(maps.roughness, *v.gt_roughness, &v.mask, true);
      s.metallic_psnr = psnr(maps.metallic, *v.gt_metallic, &v.mask, true);
      bp.push_back(*s.basecolor_psnr);
      rgp.push_back(*s.roughness_psnr);
      mp.push_back(*s.metallic_psnr);
      for (int row = 0; row < v.camera.height; ++row) {
        for (int col = 0; col < v.camera.width; ++col) {
          if (!v.foreground(row, col)) continue;
          const std::array<float, 5> key{v.gt_basecolor->at(row, col, 0), v.gt_basecolor->at(row, col, 1),
                                         v.gt_basecolor->at(row, col, 2), v.gt_roughness->at(row, col, 0),
                                         v.gt_metallic->at(row, col, 0)};
          Acc& a = groups[key];
          if (a.n == 0) {
            a.truth.base_color = Spectrum(key[0], key[1], key[2]);
            a.truth.roughness = key[3];
            a.truth.metallic = key[4];
          }
          ++a.n;
          double db = 0.0;
          for (int c = 0; c < 3; ++c) db += std::abs(maps.basecolor.at(row, col, c) - key[static_cast<std::size_t>(c)]);
          a.b += db / 3.0;
          a.r += std::abs(maps.roughness.at(row, col, 0) - key[3]);
          a.m += std::abs(maps.metallic.at(row, col, 0) - key[4]);
        }
      }
    }
    rp.push_back(s.render_psnr);
    ru.push_back(s.render_psnr_unclamped);
    rd.push_back(s.render_psnr_display);
    report.views.push_back(s);
  }
  report.mean_render_psnr = mean(rp);
  report.mean_render_psnr_unclamped = mean(ru);
  report.mean_render_psnr_display = mean(rd);
  if (!bp.empty()) {
    report.mean_basecolor_psnr = mean(bp);
    report.mean_roughness_psnr = mean(rgp);
    report.mean_metallic_psnr = mean(mp);
  }
  for (const auto& [key, a] : groups) {
    MaterialError e;
    e.truth = a.truth;
    e.pixels = a.n;
    e.basecolor_mae = a.b / static_cast<double>(a.n);
    e.roughness_mae = a.r / static_cast<double>(a.n);
    e.metallic_mae = a.m / static_cast<double>(a.n);
    report.materials.push_back(e);
  }
  return report;
}

std::string EvalReport::to_json() const {
  using nlohmann::json;
  json j;
  j["color_space"] = std::string(to_string(color_space));
  j["samples"] = samples;
  json vs = json::array();
  for (const ViewScore& s : views) {
    json v{{"view", s.view_id},
           {"render_psnr", s.render_psnr},
           {"render_psnr_unclamped", s.render_psnr_unclamped},
           {"render_psnr_display", s.render_psnr_display}};
    if (s.basecolor_psnr) {
      v["basecolor_psnr"] = *s.basecolor_psnr;
      v["roughness_psnr"] = *s.roughness_psnr;
      v["metallic_psnr"] = *s.metallic_psnr;
    }
    vs.push_back(v);
  }
  j["views"] = vs;
  j["mean"] = {{"render_psnr", mean_render_psnr},
               {"render_psnr_unclamped", mean_render_psnr_unclamped},
               {"render_psnr_display", mean_render_psnr_display}};
  if (mean_basecolor_psnr) {
    j["mean"]["basecolor_psnr"] = *mean_basecolor_psnr;
    j["mean"]["roughness_psnr"] = *mean_roughness_psnr;
    j["mean"]["metallic_psnr"] = *mean_metallic_psnr;
  }
  json ms = json::array();
  for (const MaterialError& e : materials) {
    ms.push_back({{"truth",
                   {{"base_color", {e.truth.base_color.x(), e.truth.base_color.y(), e.truth.base_color.z()}},
                    {"roughness", e.truth.roughness},
                    {"metallic", e.truth.metallic}}},
                  {"pixels", e.pixels},
                  {"basecolor_mae", e.basecolor_mae},
                  {"roughness_mae", e.roughness_mae},
                  {"metallic_mae", e.metallic_mae}});
  }
  if (!ms.empty()) j["materials"] = ms;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-6s %10s %12s %10s %10s %10s %10s\n", "view", "psnr", "psnr_raw", "psnr_disp",
                "base", "rough", "metal");
  os << line;
  auto opt = [](const std::optional<double>& v) { return v ? *v : std::nan(""); };
  for (const ViewScore& s : views) {
    std::snprintf(line, sizeof(line), "%-6d %10.3f %12.3f %10.3f %10.3f %10.3f %10.3f\n", s.view_id, s.render_psnr,
                  s.render_psnr_unclamped, s.render_psnr_display, opt(s.basecolor_psnr), opt(s.roughness_psnr),
                  opt(s.metallic_psnr));
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-6s %10.3f %12.3f %10.3f %10.3f %10.3f %10.3f\n", "mean", mean_render_psnr,
                mean_render_psnr_unclamped, mean_render_psnr_display, opt(mean_basecolor_psnr),
                opt(mean_roughness_psnr), opt(mean_metallic_psnr));
  os << line;
  for (const MaterialError& e : materials) {
    std::snprintf(line, sizeof(line),
                  "material b=(%.3f %.3f %.3f) r=%.3f m=%.3f  pixels=%zu  mae base=%.4f rough=%.4f metal=%.4f\n",
                  e.truth.base_color.x(), e.truth.base_color.y(), e.truth.base_color.z(), e.truth.roughness,
                  e.truth.metallic, e.pixels, e.basecolor_mae, e.roughness_mae, e.metallic_mae);
    os << line;
  }
  return os.str();
}

void export_brdf_maps(const SceneDataset& scene, const Model<float>& model, const std::vector<int>& view_ids,
                      const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(Error::Kind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  for (int id : view_ids) {
    const BrdfMaps maps = brdf_maps(scene, scene.view_index(id), model);
    const std::string prefix = view_prefix(id);
    write_pfm(out_dir / (prefix + "_basecolor.pfm"), maps.basecolor);
    write_pfm(out_dir / (prefix + "_roughness.pfm"), maps.roughness);
    write_pfm(out_dir / (prefix + "_metallic.pfm"), maps.metallic);
  }
}

Image probe_light(const Model<float>& model, const Vec3& x, int height) {
  if (height < 1) fail(Error::Kind::kInvalidArgument, "probe resolution must be positive");
  if (!x.allFinite() || (x.array().abs() > 1.0 + 1e-9).any())
    fail(Error::Kind::kInvalidArgument, "probe point must lie inside the normalized box [-1, 1]^3");
  const int width = 2 * height;
  const Eigen::Index n = static_cast<Eigen::Index>(width) * height;
  Matrix<float> pos(n, 3), dirs(n, 3);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const Eigen::Index i = static_cast<Eigen::Index>(row) * width + col;
      pos.row(i) = x.cast<float>().transpose();
      dirs.row(i) = latlong_direction((col + 0.5) / width, (row + 0.5) / height).cast<float>().transpose();
    }
  }
  Tape<float> tape;
  const Matrix<float>& radiance = tape.value(model.lighting.eval(tape, pos, dirs));
  Image img(width, height, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) img.data[static_cast<std::size_t>(i) * 3 + c] = radiance(i, c);
  return img;
}

}  // namespace neilf
