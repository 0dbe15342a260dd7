#pragma once

#include <string>

#include "graybox/mlp.hpp"

namespace graybox {

// Checkpoint file layout (all multi-byte values little-endian):
//   bytes 0..7   magic "GBOXMLP\n"
//   uint32       format version (currently 1)
//   uint32       hidden width
//   float64[]    w1 row-major (hidden x 2), b1, w2, b2

void save_checkpoint(const std::string& path, const MlpParams& params);

MlpParams load_checkpoint(const std::string& path);

}  // namespace graybox
