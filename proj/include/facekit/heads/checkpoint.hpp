#pragma once

#include <memory>
#include <string>

#include "facekit/heads/model.hpp"

namespace facekit::heads {

// Checkpoint container, format FKCKPT1:
//   bytes 0..7   magic "FKCKPT1\n"
//   bytes 8..15  little-endian u64: JSON header length in bytes
//   header       JSON: format version, backbone spec, head config, schema
//                binding (task -> categories), mask, policy, config hash,
//                and one entry per parameter (name, block, shape, offset)
//   payload      raw little-endian doubles, concatenated in entry order
// Writing is deterministic: same model state, same bytes.
void save_checkpoint(const std::string& path, const MultiTaskModel& model,
                     const std::string& config_hash);

struct LoadedCheckpoint {
  std::unique_ptr<MultiTaskModel> model;
  std::string config_hash;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace facekit::heads
