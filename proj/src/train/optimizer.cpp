#include "facekit/train/optimizer.hpp"

#include <cmath>

namespace facekit::train {

Adam::Adam(std::vector<backbone::Param*> params,
           const backbone::TrainabilityMask& mask, Config cfg)
    : params_(std::move(params)), cfg_(cfg) {
  trainable_.reserve(params_.size());
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (backbone::Param* p : params_) {
    trainable_.push_back(mask.trainable(*p));
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!trainable_[k]) continue;
    backbone::Param& p = *params_[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace facekit::train
