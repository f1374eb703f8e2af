#include "neilf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace neilf {

namespace {

constexpr char kMagic[8] = {'N', 'E', 'I', 'L', 'F', 'C', 'K', 'P'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void bad(const std::string& why) const {
    fail(Error::Kind::kFormat, origin_ + ": " + why + " (offset " + std::to_string(pos_) + ")");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) bad("truncated checkpoint");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

void write_config(Writer& w, const FieldConfig& c) {
  w.i32(c.hidden_layers);
  w.i32(c.width);
  w.i32(c.skip_at);
  w.i32(c.pe_frequencies);
  w.i32(c.dir_pe_frequencies);
  w.u32(c.output_activation == OutputActivation::kExponential ? 1u : 0u);
  w.f32(c.omega0);
}

FieldConfig read_config(Reader& r) {
  FieldConfig c;
  c.hidden_layers = r.i32();
  c.width = r.i32();
  c.skip_at = r.i32();
  c.pe_frequencies = r.i32();
  c.dir_pe_frequencies = r.i32();
  const std::uint32_t act = r.u32();
  if (act > 1) r.bad("unknown output activation " + std::to_string(act));
  c.output_activation = act == 1 ? OutputActivation::kExponential : OutputActivation::kBounded01;
  c.omega0 = r.f32();
  try {
    c.validate();
  } catch (const Error& e) {
    r.bad(std::string("invalid field config: ") + e.what());
  }
  return c;
}

std::vector<const ParamTensor<float>*> stored_tensors(const Model<float>& m) {
  std::vector<const ParamTensor<float>*> out = m.brdf.mlp().parameters();
  for (const auto* p : m.lighting.parameters()) out.push_back(p);
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model, std::uint64_t iteration) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.lighting.kind()));
  w.u32(model.fresnel == FresnelMode::kSchlick ? 1u : 0u);
  w.u32(model.gamma_trainable ? 1u : 0u);
  w.f32(model.log_gamma.values(0, 0));
  w.u64(iteration);
  write_config(w, model.brdf.config());
  write_config(w, model.lighting.config());
  const auto tensors = stored_tensors(model);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) {
    w.u32(static_cast<std::uint32_t>(t->name.size()));
    w.raw(t->name.data(), t->name.size());
    w.u32(static_cast<std::uint32_t>(t->rows()));
    w.u32(static_cast<std::uint32_t>(t->cols()));
    for (Eigen::Index i = 0; i < t->size(); ++i) w.f32(t->values.data()[i]);
  }
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) r.bad("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail(Error::Kind::kFormat, origin + ": incompatible checkpoint version " + std::to_string(version) +
                                   " (expected " + std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t kind = r.u32();
  if (kind > 2) r.bad("unknown lighting kind " + std::to_string(kind));
  const std::uint32_t fresnel = r.u32();
  if (fresnel > 1) r.bad("unknown fresnel mode " + std::to_string(fresnel));
  const std::uint32_t trainable = r.u32();
  const float log_gamma = r.f32();
  const std::uint64_t iteration = r.u64();
  const FieldConfig brdf_cfg = read_config(r);
  const FieldConfig light_cfg = read_config(r);

  Checkpoint ck;
  ck.iteration = iteration;
  ck.model = Model<float>(brdf_cfg, static_cast<LightingKind>(kind), light_cfg);
  ck.model.fresnel = fresnel == 1 ? FresnelMode::kSchlick : FresnelMode::kPrinted;
  ck.model.gamma_trainable = trainable != 0;
  ck.model.log_gamma.values(0, 0) = log_gamma;

  std::map<std::string, ParamTensor<float>*> by_name;
  std::vector<ParamTensor<float>*> targets = ck.model.brdf.mlp().parameters();
  for (auto* p : ck.model.lighting.parameters()) targets.push_back(p);
  for (auto* p : targets) by_name[p->name] = p;

  const std::uint32_t count = r.u32();
  if (count != targets.size())
    r.bad("tensor count " + std::to_string(count) + " does not match the stored configuration (" +
          std::to_string(targets.size()) + ")");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str(r.u32());
    const auto it = by_name.find(name);
    if (it == by_name.end()) r.bad("unexpected tensor '" + name + "'");
    ParamTensor<float>& t = *it->second;
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != t.rows() || cols != t.cols()) r.bad("tensor '" + name + "' has the wrong shape");
    for (Eigen::Index i = 0; i < t.size(); ++i) t.values.data()[i] = r.f32();
    t.zero_grad();
    by_name.erase(it);
  }
  if (!r.done()) r.bad("trailing bytes after last tensor");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, std::uint64_t iteration) {
  const auto bytes = serialize_checkpoint(model, iteration);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(Error::Kind::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Error::Kind::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Error::Kind::kIo, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Error::Kind::kIo, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path.string());
}

}  // namespace neilf
