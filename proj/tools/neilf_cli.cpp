// Command-line front end. Every subcommand is a thin wrapper over one C API call.

#include "neilf/neilf.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct Failure {
  neilf_status status;
  std::string message;
};

void check(neilf_status st) {
  if (st != NEILF_OK) throw Failure{st, neilf_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  neilf_string_free(s);
  return out;
}

struct SceneDel {
  void operator()(neilf_scene* s) const { neilf_scene_free(s); }
};
struct ModelDel {
  void operator()(neilf_model* m) const { neilf_model_free(m); }
};
struct ConfigDel {
  void operator()(neilf_config* c) const { neilf_config_free(c); }
};
using ScenePtr = std::unique_ptr<neilf_scene, SceneDel>;
using ModelPtr = std::unique_ptr<neilf_model, ModelDel>;
using ConfigPtr = std::unique_ptr<neilf_config, ConfigDel>;

ScenePtr load_scene(const std::string& dir, const char* gradient = nullptr) {
  neilf_scene* s = nullptr;
  check(neilf_scene_load(dir.c_str(), gradient, &s));
  return ScenePtr(s);
}

ModelPtr load_model(const std::string& path) {
  neilf_model* m = nullptr;
  check(neilf_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw Failure{NEILF_ERR_IO, "cannot write " + path.string()};
}

std::vector<std::string> config_keys() {
  char* keys = nullptr;
  check(neilf_config_keys(&keys));
  std::istringstream in(take(keys));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

void print_error(const std::string& status, const std::string& message) {
  nlohmann::json err{{"error", {{"status", status}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural incident light field inverse renderer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(neilf_version()));

  // synth
  auto* synth = app.add_subcommand("synth", "Render an analytic scene into a dataset directory");
  std::string synth_scene = "sphere-plane", synth_out, synth_cs = "hdr";
  int synth_views = 12, synth_res = 64, synth_spp = 512, synth_holdout = 4;
  synth->add_option("--scene", synth_scene, "sphere-plane | sphere-plane-mixed | furnace")->capture_default_str();
  synth->add_option("--views", synth_views, "Number of cameras")->capture_default_str();
  synth->add_option("--res", synth_res, "Image resolution (square)")->capture_default_str();
  synth->add_option("--spp", synth_spp, "Environment quadrature directions per pixel")->capture_default_str();
  synth->add_option("--holdout", synth_holdout, "Every k-th view goes to the test split")->capture_default_str();
  synth->add_option("--color-space", synth_cs, "hdr | ldr")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Optimize BRDF and lighting fields on a dataset");
  std::string train_data, train_out, preset = "desk", gradient = "grayscale";
  bool quiet = false;
  int log_every = 100;
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Run directory (metrics, checkpoints)")->required();
  train->add_option("--preset", preset, "paper | desk")->capture_default_str();
  train->add_option("--gradient-mode", gradient, "grayscale | per-channel")->capture_default_str();
  train->add_flag("--quiet", quiet, "Suppress progress lines");
  train->add_option("--log-every", log_every, "Progress line interval")->capture_default_str();
  const std::vector<std::string> keys = config_keys();
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> override_opts;
  for (const auto& k : keys) override_opts[k] = train->add_option(flag_name(k), overrides[k], "Config field " + k);

  // eval
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on the test split");
  std::string eval_data, eval_ckpt, eval_out, eval_renders, eval_sampler = "fibonacci";
  int eval_samples = 256;
  std::uint64_t eval_seed = 0;
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--samples", eval_samples, "Incident directions per point")->capture_default_str();
  eval->add_option("--sampler", eval_sampler, "fibonacci | random")->capture_default_str();
  eval->add_option("--seed", eval_seed, "Seed for the random sampler")->capture_default_str();
  eval->add_option("--out", eval_out, "Report path (default: next to the checkpoint)");
  eval->add_option("--renders", eval_renders, "Directory for rendered test views");

  // export-brdf
  auto* exportb = app.add_subcommand("export-brdf", "Write per-view base color, roughness and metallic maps");
  std::string ex_data, ex_ckpt, ex_out;
  std::vector<int> ex_views;
  exportb->add_option("--data", ex_data, "Dataset directory")->required();
  exportb->add_option("--ckpt", ex_ckpt, "Checkpoint file")->required();
  exportb->add_option("--views", ex_views, "View ids (default: all)");
  exportb->add_option("--out", ex_out, "Output directory")->required();

  // probe-light
  auto* probe = app.add_subcommand("probe-light", "Lat-long image of the incident light at a point");
  std::string pr_ckpt, pr_data, pr_out;
  std::vector<double> pr_x;
  int pr_res = 16;
  probe->add_option("--ckpt", pr_ckpt, "Checkpoint file")->required();
  probe->add_option("--x", pr_x, "Point (world coordinates with --data, else normalized)")->required()->expected(3);
  probe->add_option("--data", pr_data, "Dataset directory for world-to-normalized mapping");
  probe->add_option("--res", pr_res, "Probe height in texels (width is twice this)")->capture_default_str();
  probe->add_option("--out", pr_out, "Output PFM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*synth) {
      check(neilf_synth(synth_scene.c_str(), synth_views, synth_res, synth_spp, synth_holdout, synth_cs.c_str(),
                        synth_out.c_str()));
      std::cout << "wrote " << synth_views << " views to " << synth_out << "\n";
    } else if (*train) {
      neilf_config* raw = nullptr;
      check(neilf_config_create(preset.c_str(), &raw));
      ConfigPtr cfg(raw);
      for (const auto& k : keys)
        if (override_opts[k]->count() > 0) check(neilf_config_set(cfg.get(), k.c_str(), overrides[k].c_str()));
      // Desk milestones follow the iteration count unless given explicitly.
      if (preset == "desk" && override_opts["total_iters"]->count() > 0 && override_opts["decay_iters"]->count() == 0)
        check(neilf_config_proportional_milestones(cfg.get()));
      check(neilf_config_validate(cfg.get()));
      ScenePtr scene = load_scene(train_data, gradient.c_str());
      fs::create_directories(train_out);
      char* js = nullptr;
      check(neilf_config_to_json(cfg.get(), &js));
      write_text(fs::path(train_out) / "config.json", take(js) + "\n");
      struct Progress {
        bool quiet;
        int every;
      } progress{quiet, std::max(log_every, 1)};
      auto cb = [](int iter, double lr, double total, void* user) {
        const auto* p = static_cast<Progress*>(user);
        if (!p->quiet && iter % p->every == 0) std::printf("iter %6d  lr %.3e  loss %.6f\n", iter, lr, total);
        std::fflush(stdout);
      };
      check(neilf_train(scene.get(), cfg.get(), train_out.c_str(), cb, &progress, nullptr));
      std::cout << "final checkpoint: " << (fs::path(train_out) / "final").string() << "\n";
    } else if (*eval) {
      ScenePtr scene = load_scene(eval_data);
      ModelPtr model = load_model(eval_ckpt);
      char* js = nullptr;
      char* table = nullptr;
      check(neilf_evaluate(scene.get(), model.get(), eval_samples, eval_sampler.c_str(), eval_seed,
                           eval_renders.empty() ? nullptr : eval_renders.c_str(), &js, &table));
      const std::string report = take(js);
      std::cout << take(table);
      const fs::path out =
          eval_out.empty() ? fs::path(eval_ckpt).parent_path() / "eval_report.json" : fs::path(eval_out);
      write_text(out, report + "\n");
      std::cout << "report: " << out.string() << "\n";
    } else if (*exportb) {
      ScenePtr scene = load_scene(ex_data);
      ModelPtr model = load_model(ex_ckpt);
      check(neilf_export_brdf(scene.get(), model.get(), ex_views.data(), static_cast<int>(ex_views.size()),
                              ex_out.c_str()));
      std::cout << "maps written to " << ex_out << "\n";
    } else if (*probe) {
      ModelPtr model = load_model(pr_ckpt);
      ScenePtr scene;
      if (!pr_data.empty()) scene = load_scene(pr_data);
      const std::array<double, 3> x{pr_x[0], pr_x[1], pr_x[2]};
      check(neilf_probe_light(model.get(), scene.get(), x.data(), pr_res, pr_out.c_str()));
      std::cout << "probe written to " << pr_out << "\n";
    }
  } catch (const Failure& f) {
    print_error(neilf_status_name(f.status), f.message);
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return static_cast<int>(NEILF_ERR_INTERNAL);
  }
  return 0;
}
