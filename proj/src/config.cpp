#include "neilf/trainer.hpp"

#include "json.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>

namespace neilf {

namespace {

struct Field {
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

[[noreturn]] void bad_value(std::string_view value, const char* expected) {
  fail(Error::Kind::kInvalidArgument, "cannot parse '" + std::string(value) + "' as " + expected);
}

long long parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(s, "an integer");
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(s, "an unsigned integer");
  return v;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(s, "a number");
  return v;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Field int_field(int TrainConfig::*member) {
  return {[member](TrainConfig& c, std::string_view v) { c.*member = static_cast<int>(parse_int(v)); },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field field_int(int FieldConfig::*member, FieldConfig TrainConfig::*which) {
  return {[=](TrainConfig& c, std::string_view v) { (c.*which).*member = static_cast<int>(parse_int(v)); },
          [=](const TrainConfig& c) { return std::to_string((c.*which).*member); }};
}

Field double_field(double TrainConfig::*member) {
  return {[member](TrainConfig& c, std::string_view v) { c.*member = parse_double(v); },
          [member](const TrainConfig& c) { return fmt_double(c.*member); }};
}

Field weight_field(double LossWeights::*member) {
  return {[member](TrainConfig& c, std::string_view v) { c.weights.*member = parse_double(v); },
          [member](const TrainConfig& c) { return fmt_double(c.weights.*member); }};
}

Field omega_field(FieldConfig TrainConfig::*which) {
  return {[=](TrainConfig& c, std::string_view v) { (c.*which).omega0 = static_cast<float>(parse_double(v)); },
          [=](const TrainConfig& c) { return fmt_double((c.*which).omega0); }};
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = [] {
    std::map<std::string, Field, std::less<>> t;
    t["total_iters"] = int_field(&TrainConfig::total_iters);
    t["batch_size"] = int_field(&TrainConfig::batch_size);
    t["lr_init"] = double_field(&TrainConfig::lr_init);
    t["decay_factor"] = double_field(&TrainConfig::decay_factor);
    t["decay_iters"] = {[](TrainConfig& c, std::string_view v) {
                          c.decay_iters.clear();
                          while (!v.empty()) {
                            const auto comma = v.find(',');
                            c.decay_iters.push_back(static_cast<int>(parse_int(v.substr(0, comma))));
                            if (comma == std::string_view::npos) break;
                            v.remove_prefix(comma + 1);
                          }
                        },
                        [](const TrainConfig& c) {
                          std::string out;
                          for (std::size_t i = 0; i < c.decay_iters.size(); ++i)
                            out += (i ? "," : "") + std::to_string(c.decay_iters[i]);
                          return out;
                        }};
    t["train_samples"] = int_field(&TrainConfig::train_samples);
    t["eval_samples"] = int_field(&TrainConfig::eval_samples);
    t["sampler"] = {[](TrainConfig& c, std::string_view v) { c.sampler = parse_sampler_kind(v); },
                    [](const TrainConfig& c) { return std::string(to_string(c.sampler)); }};
    t["lighting"] = {[](TrainConfig& c, std::string_view v) { c.lighting = parse_lighting_kind(v); },
                     [](const TrainConfig& c) { return std::string(to_string(c.lighting)); }};
    t["w_image"] = weight_field(&LossWeights::image);
    t["w_s"] = weight_field(&LossWeights::smooth);
    t["w_l"] = weight_field(&LossWeights::lambertian);
    t["seed"] = {[](TrainConfig& c, std::string_view v) { c.seed = parse_u64(v); },
                 [](const TrainConfig& c) { return std::to_string(c.seed); }};
    t["brdf_layers"] = field_int(&FieldConfig::hidden_layers, &TrainConfig::brdf_field);
    t["brdf_width"] = field_int(&FieldConfig::width, &TrainConfig::brdf_field);
    t["brdf_skip"] = field_int(&FieldConfig::skip_at, &TrainConfig::brdf_field);
    t["brdf_pe_frequencies"] = field_int(&FieldConfig::pe_frequencies, &TrainConfig::brdf_field);
    t["brdf_omega0"] = omega_field(&TrainConfig::brdf_field);
    t["light_layers"] = field_int(&FieldConfig::hidden_layers, &TrainConfig::light_field);
    t["light_width"] = field_int(&FieldConfig::width, &TrainConfig::light_field);
    t["light_skip"] = field_int(&FieldConfig::skip_at, &TrainConfig::light_field);
    t["light_pe_frequencies"] = field_int(&FieldConfig::pe_frequencies, &TrainConfig::light_field);
    t["light_dir_pe_frequencies"] = field_int(&FieldConfig::dir_pe_frequencies, &TrainConfig::light_field);
    t["light_omega0"] = omega_field(&TrainConfig::light_field);
    t["fresnel"] = {[](TrainConfig& c, std::string_view v) { c.fresnel = parse_fresnel_mode(v); },
                    [](const TrainConfig& c) { return std::string(to_string(c.fresnel)); }};
    t["checkpoint_every"] = int_field(&TrainConfig::checkpoint_every);
    t["chunk_size"] = int_field(&TrainConfig::chunk_size);
    t["workers"] = int_field(&TrainConfig::workers);
    t["env_init"] = double_field(&TrainConfig::env_init);
    t["ldr_gamma_init"] = double_field(&TrainConfig::ldr_gamma_init);
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) fail(Error::Kind::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(cfg, value);
  } catch (const Error& e) {
    fail(e.kind(), "config key '" + std::string(key) + "': " + e.what());
  }
}

std::string get_config_value(const TrainConfig& cfg, std::string_view key) {
  const auto it = fields().find(key);
  if (it == fields().end()) fail(Error::Kind::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  return it->second.get(cfg);
}

std::string config_to_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, f] : fields()) j[name] = f.get(cfg);
  return j.dump(2);
}

}  // namespace neilf
