#include "facekit/train/scheduler.hpp"

#include <algorithm>
#include <limits>

#include "facekit/core/error.hpp"

namespace facekit::train {

void PlateauConfig::validate() const {
  check(factor > 0.0 && factor < 1.0, "lr decay factor must lie in (0, 1)");
  check(min_lr > 0.0 && min_lr <= initial_lr,
        "need 0 < min_lr <= initial_lr");
  check(patience >= 1, "lr patience must be at least 1");
}

PlateauScheduler::PlateauScheduler(PlateauConfig cfg)
    : cfg_(cfg),
      lr_(cfg.initial_lr),
      best_(std::numeric_limits<double>::infinity()) {
  cfg_.validate();
}

double PlateauScheduler::step(double eval_loss) {
  if (eval_loss < best_) {
    best_ = eval_loss;
    bad_ = 0;
  } else {
    ++bad_;
    if (bad_ >= cfg_.patience) {
      lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
      bad_ = 0;
    }
  }
  return lr_;
}

double lr_step(double current_lr, const std::vector<double>& eval_history,
               const PlateauConfig& cfg) {
  cfg.validate();
  double best = std::numeric_limits<double>::infinity();
  int bad = 0;
  bool decayed_last = false;
  for (double loss : eval_history) {
    decayed_last = false;
    if (loss < best) {
      best = loss;
      bad = 0;
    } else {
      ++bad;
      if (bad >= cfg.patience) {
        decayed_last = true;
        bad = 0;
      }
    }
  }
  if (decayed_last) return std::max(current_lr * cfg.factor, cfg.min_lr);
  return current_lr;
}

}  // namespace facekit::train
