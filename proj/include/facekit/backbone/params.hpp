#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "facekit/core/tensor.hpp"

namespace facekit::backbone {

// One learnable tensor. `block` groups parameters into the units the
// adaptation policies freeze or unfreeze; head parameters use blocks named
// "head.<task>".
struct Param {
  std::string block;
  std::string name;  // unique, e.g. "block2.w1"
  Tensor value;
  Tensor grad;

  Param(std::string block_, std::string name_, std::vector<std::size_t> shape)
      : block(std::move(block_)),
        name(std::move(name_)),
        value(shape),
        grad(std::move(shape)) {}
};

// Per-block trainability. Backbone blocks are listed explicitly; head blocks
// are trainable by construction and never appear in the map.
struct TrainabilityMask {
  std::map<std::string, bool> backbone_blocks;

  bool trainable(const Param& p) const;
};

// One of the three adaptation methods.
enum class AdaptationPolicy { kLP, kPT, kFFT };

AdaptationPolicy policy_from_name(const std::string& name);
const std::string& policy_name(AdaptationPolicy p);

// Number of scalar parameters the mask leaves trainable (heads included).
std::size_t count_trainable(const TrainabilityMask& mask,
                            const std::vector<const Param*>& params);

// Order-sensitive hash over the raw values of every parameter in `block`.
// The freeze-integrity checks compare it across a fit.
std::uint64_t block_hash(const std::vector<const Param*>& params,
                         const std::string& block);

}  // namespace facekit::backbone
