#pragma once

#include <vector>

namespace facekit::train {

// Reduce-on-plateau learning rate schedule. An epoch improves when its eval
// loss is strictly below the best seen; after `patience` consecutive
// non-improving epochs the rate is multiplied by `factor` (floored at
// `min_lr`) and the plateau counter resets.
struct PlateauConfig {
  double initial_lr = 1e-3;
  double factor = 0.5;
  double min_lr = 1e-6;
  int patience = 3;

  void validate() const;
};

class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauConfig cfg);

  double lr() const { return lr_; }
  // Observes one epoch's eval loss; returns the rate for the next epoch.
  double step(double eval_loss);

 private:
  PlateauConfig cfg_;
  double lr_;
  double best_;
  int bad_ = 0;
};

// Pure single-step form: replays the plateau triggers over the full eval
// history and decays current_lr exactly when the final entry completes a
// plateau. Feeding the growing history epoch by epoch reproduces the
// scheduler class.
double lr_step(double current_lr, const std::vector<double>& eval_history,
               const PlateauConfig& cfg);

}  // namespace facekit::train
