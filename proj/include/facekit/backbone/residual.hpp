#pragma once

#include "facekit/backbone/backbone.hpp"

namespace facekit::backbone {

// Toy residual feature extractor. block1 holds the input projection
// (w0: feature_dim x 3HW) followed by the first residual pair; every further
// block is one residual pair computing x + W2*relu(W1*x + b1) + b2. W2 and
// the biases start at zero, so every block is the identity map at init and
// the net begins as a random-feature projection.
class ResidualBackbone : public Backbone {
 public:
  explicit ResidualBackbone(const BackboneSpec& spec);

  const BackboneSpec& spec() const override { return spec_; }
  std::vector<std::string> block_names() const override;
  std::vector<Param*> params() override;
  Tensor forward(const Tensor& batch, bool grad_enabled) override;
  void backward(const Tensor& d_features) override;

 private:
  Param& find(const std::string& name);

  BackboneSpec spec_;
  std::vector<Param> params_;

  // Forward caches, valid between a grad-enabled forward and backward.
  bool cached_ = false;
  Tensor in_;                    // N x 3HW
  Tensor z0_;                    // projection pre-activation
  std::vector<Tensor> block_in_;  // x entering each residual pair
  std::vector<Tensor> block_u_;   // W1 pre-activation
  std::vector<Tensor> block_r_;   // relu(u)
};

}  // namespace facekit::backbone
