#pragma once

#include <map>
#include <memory>

#include "facekit/backbone/backbone.hpp"
#include "facekit/heads/heads.hpp"

namespace facekit::heads {

// Shared backbone feeding one head per schema task. The trainability mask
// governs which backbone blocks receive gradients and optimizer updates;
// heads are always trainable.
class MultiTaskModel {
 public:
  MultiTaskModel(std::unique_ptr<backbone::Backbone> bb,
                 data::LabelSchema schema, const HeadConfig& head_cfg,
                 std::uint64_t head_init_seed);

  backbone::Backbone& bb() { return *backbone_; }
  const backbone::Backbone& bb() const { return *backbone_; }
  const data::LabelSchema& schema() const { return schema_; }
  const HeadConfig& head_config() const { return head_cfg_; }
  std::uint64_t head_init_seed() const { return head_init_seed_; }

  const backbone::TrainabilityMask& mask() const { return mask_; }
  void set_policy(backbone::AdaptationPolicy policy);
  backbone::AdaptationPolicy policy() const { return policy_; }
  bool backbone_trainable() const;

  Head& head(data::TaskKind t);
  std::vector<data::TaskKind> tasks() const;

  // One backbone pass, then every head. grad_enabled caches for backward;
  // the backbone only caches when a backbone block is trainable.
  std::map<data::TaskKind, Tensor> forward(const Tensor& batch, bool training,
                                           Rng* dropout_rng,
                                           bool grad_enabled);
  // Per-task logit gradients -> parameter gradients.
  void backward(const std::map<data::TaskKind, Tensor>& dlogits);

  std::vector<backbone::Param*> params();
  std::vector<const backbone::Param*> const_params() const;
  void zero_grads();

 private:
  std::unique_ptr<backbone::Backbone> backbone_;
  data::LabelSchema schema_;
  HeadConfig head_cfg_;
  std::uint64_t head_init_seed_;
  std::map<data::TaskKind, Head> heads_;
  backbone::TrainabilityMask mask_;
  backbone::AdaptationPolicy policy_ = backbone::AdaptationPolicy::kFFT;
  bool backbone_cached_ = false;
};

}  // namespace facekit::heads
