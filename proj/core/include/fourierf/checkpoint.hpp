#pragma once

#include <string>

#include "fourierf/model.hpp"

namespace fourierf {

/// Binary checkpoint layout (documented in the README):
///   magic "FOURIERF1" (9 bytes), endianness tag u32 = 0x01020304,
///   header (decomposition, dims, box, ranks, channels, decoder shape),
///   then every parameter array row-major in the stable enumeration
///   order, preceded by the total double count (u64).
void save_checkpoint(const Model& m, const std::string& path);

/// Throws std::runtime_error on missing file, bad magic, foreign
/// endianness, or truncated payload.
Model load_checkpoint(const std::string& path);

}  // namespace fourierf
