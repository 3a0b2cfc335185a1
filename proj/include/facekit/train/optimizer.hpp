#pragma once

#include <vector>

#include "facekit/backbone/params.hpp"

namespace facekit::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive moment optimizer: per-parameter first/second moment accumulators
// with bias correction. Frozen parameters are skipped entirely; their values
// and moments never move.
class Adam {
 public:
  using Config = AdamConfig;

  Adam(std::vector<backbone::Param*> params,
       const backbone::TrainabilityMask& mask, Config cfg = {});

  // One update from the gradients currently stored on the parameters.
  void step(double lr);

  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<backbone::Param*> params_;
  std::vector<bool> trainable_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  Config cfg_;
  std::size_t t_ = 0;
};

}  // namespace facekit::train
