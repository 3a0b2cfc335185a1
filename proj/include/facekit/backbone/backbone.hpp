#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "facekit/backbone/params.hpp"
#include "facekit/core/tensor.hpp"

namespace facekit::backbone {

// Architecture description for the two toy feature extractors. The residual
// net ignores the patch/head/MLP fields; the transformer reads all of them.
struct BackboneSpec {
  std::string kind = "residual";  // "residual" or "transformer"
  int input_h = 32;
  int input_w = 32;
  int feature_dim = 64;  // residual width / transformer embed dim
  int num_blocks = 4;    // residual blocks; encoder layers for transformer
  int patch_size = 16;   // transformer only
  int num_heads = 4;     // transformer only
  int mlp_hidden = 256;  // transformer only
  bool cls_token = false;  // transformer pooling: mean unless set
  std::uint64_t init_seed = 42;

  std::size_t input_len() const {
    return 3 * static_cast<std::size_t>(input_h) * input_w;
  }
  void validate() const;
};

// Feature extractor over flattened image batches. forward() consumes an
// N x 3 x H x W (or N x 3HW) tensor and yields N x feature_dim; when
// grad_enabled it caches activations so a single following backward() can
// accumulate parameter gradients.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual const BackboneSpec& spec() const = 0;
  virtual std::vector<std::string> block_names() const = 0;
  virtual std::vector<Param*> params() = 0;
  virtual Tensor forward(const Tensor& batch, bool grad_enabled) = 0;
  virtual void backward(const Tensor& d_features) = 0;

  std::vector<const Param*> const_params() const;
};

std::unique_ptr<Backbone> make_backbone(const BackboneSpec& spec);

// Derives the per-block trainability mask for a policy: LP freezes every
// backbone block, PT unfreezes exactly the last one, FFT unfreezes all.
TrainabilityMask apply_adaptation_policy(const Backbone& bb,
                                         AdaptationPolicy policy);

}  // namespace facekit::backbone
