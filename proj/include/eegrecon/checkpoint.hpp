#pragma once

#include "eegrecon/layers.hpp"

#include <string>

namespace eegrecon {

// Flat little-endian binary checkpoint:
//   magic "ERCKPT01" (8 bytes), u32 version, u32 block count,
//   then per block: u32 name length, name bytes, u32 ndim, u64 dims[ndim],
//   f64 data[prod(dims)].
// Loading restores names, shapes and values bit-exactly.
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

// copies values from src into dst; names, order and sizes must match
void restore_values(ParamStore& dst, const ParamStore& src);

} // namespace eegrecon
