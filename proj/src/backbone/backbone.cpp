#include "facekit/backbone/backbone.hpp"

#include "facekit/backbone/residual.hpp"
#include "facekit/backbone/transformer.hpp"
#include "facekit/core/error.hpp"

namespace facekit::backbone {

void BackboneSpec::validate() const {
  check(kind == "residual" || kind == "transformer",
        "backbone kind must be residual or transformer");
  check(feature_dim > 0, "feature_dim must be positive");
  check(num_blocks >= 1, "backbone needs at least one block");
  check(input_h > 0 && input_w > 0, "backbone input size must be positive");
  if (kind == "transformer") {
    check(patch_size > 0 && input_h % patch_size == 0 &&
              input_w % patch_size == 0,
          "input size must be divisible by patch_size");
    check(num_heads > 0 && feature_dim % num_heads == 0,
          "feature_dim must be divisible by num_heads");
    check(mlp_hidden > 0, "mlp_hidden must be positive");
  }
}

std::vector<const Param*> Backbone::const_params() const {
  auto* self = const_cast<Backbone*>(this);
  std::vector<const Param*> out;
  for (Param* p : self->params()) out.push_back(p);
  return out;
}

std::unique_ptr<Backbone> make_backbone(const BackboneSpec& spec) {
  spec.validate();
  if (spec.kind == "residual")
    return std::make_unique<ResidualBackbone>(spec);
  return std::make_unique<TransformerBackbone>(spec);
}

TrainabilityMask apply_adaptation_policy(const Backbone& bb,
                                         AdaptationPolicy policy) {
  const std::vector<std::string> blocks = bb.block_names();
  check(!blocks.empty(), "backbone reports no blocks");
  TrainabilityMask mask;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    bool trainable = false;
    switch (policy) {
      case AdaptationPolicy::kLP:
        trainable = false;
        break;
      case AdaptationPolicy::kPT:
        trainable = (i + 1 == blocks.size());
        break;
      case AdaptationPolicy::kFFT:
        trainable = true;
        break;
    }
    mask.backbone_blocks[blocks[i]] = trainable;
  }
  return mask;
}

}  // namespace facekit::backbone
