#pragma once

// Binary checkpoint container. All integers and reals are little-endian.
//
//   offset  type        content
//   0       char[8]     "NEILFCKP"
//   8       u32         format version (currently 1)
//   12      u32         lighting kind (0 neilf, 1 ne_env, 2 pix_env)
//   16      u32         fresnel mode (0 printed, 1 schlick)
//   20      u32         gamma trainable (0 / 1)
//   24      f32         log_gamma
//   28      u64         iteration counter
//   36      config      BRDF field config
//           config      lighting field config
//           u32         tensor count, then per tensor:
//                         u32 name length, name bytes (UTF-8, no terminator),
//                         u32 rows, u32 cols, rows*cols f32 values (row-major)
//
// A field config is seven 32-bit words: i32 hidden_layers, i32 width, i32 skip_at,
// i32 pe_frequencies, i32 dir_pe_frequencies, u32 output activation (0 bounded, 1 exp), f32 omega0.

#include "neilf/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace neilf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model<float> model;
  std::uint64_t iteration = 0;
};

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model, std::uint64_t iteration);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

// Writes atomically through a temporary file in the same directory.
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, std::uint64_t iteration);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace neilf
