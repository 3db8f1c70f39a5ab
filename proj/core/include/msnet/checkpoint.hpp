#pragma once

#include <filesystem>

#include "msnet/model.hpp"

namespace msnet {

// Checkpoint file layout (little-endian throughout):
//   bytes 0..7   magic "MSNETCK1"
//   u32          format version (1)
//   u32          input_size
//   u32          channels
//   u32          pyramid_depth
//   u8           fusion_mode (0 = subtract, 1 = add)
//   u8           lossnet_enabled
//   u16          reserved (0)
//   u64          seed
//   u32          tensor count
//   per tensor, in ModelParams::named_tensors() order:
//     u32 rank, u32 extents[rank], f64 data[prod(extents)]
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

// Rebuilds the architecture from the embedded config and loads the tensors,
// validating shapes against it. Malformed files raise parse errors naming
// the offending field.
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace msnet
