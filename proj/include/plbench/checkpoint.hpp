#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "plbench/model.hpp"

namespace plbench {

// Binary model checkpoint. Layout in docs/checkpoint_format.md; all integers and
// floats little-endian:
//
//   magic    8 bytes  "PLBCKPT\0"
//   version  u32      1
//   nconfig  u32      then nconfig x { u32 name_len, name bytes, u64 value }
//   ntensor  u32      then ntensor x { u32 name_len, name bytes, u32 rows, u32 cols,
//                                      rows*cols f32 row-major }
//
// Only parameters are stored; a loaded state has zero velocity. Parameters that are
// not float-representable are rounded on save.

std::vector<std::uint8_t> encode_checkpoint(const ModelState& state);
ModelState decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace plbench
