#include "facekit/heads/model.hpp"

#include "facekit/core/error.hpp"

namespace facekit::heads {

MultiTaskModel::MultiTaskModel(std::unique_ptr<backbone::Backbone> bb,
                               data::LabelSchema schema,
                               const HeadConfig& head_cfg,
                               std::uint64_t head_init_seed)
    : backbone_(std::move(bb)),
      schema_(std::move(schema)),
      head_cfg_(head_cfg),
      head_init_seed_(head_init_seed) {
  check(backbone_ != nullptr, "model needs a backbone");
  check(!schema_.tasks.empty(), "model schema has no tasks");
  const std::size_t feature_dim =
      static_cast<std::size_t>(backbone_->spec().feature_dim);
  Rng rng(head_init_seed_);
  for (const HeadSpec& spec : make_head_specs(schema_, head_cfg_))
    heads_.emplace(spec.task, Head(spec, feature_dim, rng));
  set_policy(backbone::AdaptationPolicy::kFFT);
}

void MultiTaskModel::set_policy(backbone::AdaptationPolicy policy) {
  policy_ = policy;
  mask_ = backbone::apply_adaptation_policy(*backbone_, policy);
}

bool MultiTaskModel::backbone_trainable() const {
  for (const auto& [block, trainable] : mask_.backbone_blocks)
    if (trainable) return true;
  return false;
}

Head& MultiTaskModel::head(data::TaskKind t) {
  auto it = heads_.find(t);
  if (it == heads_.end())
    throw ConfigError("model has no head for task " + data::task_name(t));
  return it->second;
}

std::vector<data::TaskKind> MultiTaskModel::tasks() const {
  std::vector<data::TaskKind> out;
  for (const auto& [task, head] : heads_) out.push_back(task);
  return out;
}

std::map<data::TaskKind, Tensor> MultiTaskModel::forward(const Tensor& batch,
                                                         bool training,
                                                         Rng* dropout_rng,
                                                         bool grad_enabled) {
  const bool backbone_grads = grad_enabled && backbone_trainable();
  Tensor features = backbone_->forward(batch, backbone_grads);
  backbone_cached_ = backbone_grads;
  std::map<data::TaskKind, Tensor> logits;
  for (auto& [task, head] : heads_)
    logits[task] = head.forward(features, training, dropout_rng, grad_enabled);
  return logits;
}

void MultiTaskModel::backward(
    const std::map<data::TaskKind, Tensor>& dlogits) {
  Tensor d_features;
  for (auto& [task, head] : heads_) {
    auto it = dlogits.find(task);
    if (it == dlogits.end()) continue;
    Tensor df = head.backward(it->second);
    if (d_features.empty()) {
      d_features = std::move(df);
    } else {
      for (std::size_t i = 0; i < d_features.size(); ++i)
        d_features[i] += df[i];
    }
  }
  if (backbone_cached_ && !d_features.empty()) {
    backbone_->backward(d_features);
    backbone_cached_ = false;
  }
}

std::vector<backbone::Param*> MultiTaskModel::params() {
  std::vector<backbone::Param*> out = backbone_->params();
  for (auto& [task, head] : heads_)
    for (backbone::Param* p : head.params()) out.push_back(p);
  return out;
}

std::vector<const backbone::Param*> MultiTaskModel::const_params() const {
  auto* self = const_cast<MultiTaskModel*>(this);
  std::vector<const backbone::Param*> out;
  for (backbone::Param* p : self->params()) out.push_back(p);
  return out;
}

void MultiTaskModel::zero_grads() {
  for (backbone::Param* p : params()) p->grad.zero();
}

}  // namespace facekit::heads
