#pragma once

#include "facekit/backbone/backbone.hpp"

namespace facekit::backbone {

// Raw patch extraction: slices a 3 x H x W tensor into row-major patches,
// each flattened channel-major into a 3*p*p vector. With an identity
// projection this is invertible, which the tests exercise.
Tensor extract_patches(const Tensor& chw, int patch_size);

// Patch embedding: extract_patches followed by the linear projection
// w (embed x 3p^2), b (embed). Output is (H/p)(W/p) x embed.
Tensor patchify(const Tensor& chw, int patch_size, const Param& w,
                const Param& b);

// Toy patch-attention transformer. Blocks: "embed" (patch projection,
// positional table, optional cls token) and one "layerK" per pre-LN encoder
// layer (LN -> multi-head attention -> residual, LN -> 2-layer MLP ->
// residual). The global feature is the mean over token outputs, or the cls
// token's output when spec.cls_token is set.
class TransformerBackbone : public Backbone {
 public:
  explicit TransformerBackbone(const BackboneSpec& spec);

  const BackboneSpec& spec() const override { return spec_; }
  std::vector<std::string> block_names() const override;
  std::vector<Param*> params() override;
  Tensor forward(const Tensor& batch, bool grad_enabled) override;
  void backward(const Tensor& d_features) override;

 private:
  struct RowNorm {
    Tensor out;         // S x E, post scale-shift (the next layer's input)
    Tensor normalized;  // S x E, pre scale-shift
    std::vector<double> rstd;
  };
  struct LayerCache {
    Tensor x_in;       // S x E entering the layer
    RowNorm ln1;
    Tensor q, k, v;    // S x E each
    std::vector<Tensor> attn;  // per head S x S probabilities
    Tensor attn_concat;        // S x E, input of the output projection
    Tensor x_mid;              // after the attention residual
    RowNorm ln2;
    Tensor mlp_pre;            // S x M pre-activation
    Tensor mlp_act;            // relu(mlp_pre)
  };
  struct SampleCache {
    Tensor patches;  // S_patches x 3p^2
    std::vector<LayerCache> layers;
  };

  Param& find(const std::string& name);
  std::size_t tokens() const;  // patch count plus optional cls

  BackboneSpec spec_;
  std::vector<Param> params_;
  bool cached_ = false;
  std::vector<SampleCache> cache_;
};

}  // namespace facekit::backbone
