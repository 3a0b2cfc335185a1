#pragma once

#include <vector>

#include "facekit/backbone/params.hpp"
#include "facekit/core/rng.hpp"
#include "facekit/core/tensor.hpp"
#include "facekit/data/types.hpp"

namespace facekit::heads {

// Structure of one task head: a stack of ReLU hidden layers with dropout,
// then a linear layer with one neuron per class.
struct HeadSpec {
  data::TaskKind task = data::TaskKind::kGaze;
  std::vector<int> hidden_sizes = {256, 128};
  double dropout_rate = 0.3;
  int num_classes = 0;

  void validate() const;
};

struct HeadConfig {
  std::vector<int> hidden_sizes = {256, 128};
  double dropout_rate = 0.3;
};

// Builds one structurally identical spec per schema task, with num_classes
// bound to that task's category count.
std::vector<HeadSpec> make_head_specs(const data::LabelSchema& schema,
                                      const HeadConfig& cfg);

// One task head. Parameters live in block "head.<task>".
class Head {
 public:
  Head(const HeadSpec& spec, std::size_t feature_dim, Rng& init_rng);

  const HeadSpec& spec() const { return spec_; }
  std::vector<backbone::Param*> params();

  // features: N x feature_dim -> logits N x num_classes. Dropout draws from
  // `rng` only when training; eval mode is deterministic. A grad-enabled
  // call caches activations for backward.
  Tensor forward(const Tensor& features, bool training, Rng* rng,
                 bool grad_enabled);
  // dlogits -> parameter gradient accumulation; returns d_features.
  Tensor backward(const Tensor& dlogits);

 private:
  HeadSpec spec_;
  std::vector<backbone::Param> params_;  // w1,b1,w2,b2,...,wL,bL
  bool cached_ = false;
  std::vector<Tensor> inputs_;  // input of each dense layer
  std::vector<Tensor> preact_;  // hidden pre-activations
  std::vector<Tensor> dropmask_;  // per hidden layer; empty in eval mode
};

// Argmax per row; ties resolve to the lowest index.
std::vector<int> predict(const Tensor& logits);

// Row-wise softmax (numerically stabilized); used at evaluation time.
Tensor softmax(const Tensor& logits);

}  // namespace facekit::heads
