#pragma once

#include <limits>
#include <string>

#include "facekit/heads/model.hpp"
#include "facekit/preprocess/pipeline.hpp"
#include "facekit/train/loss.hpp"
#include "facekit/train/optimizer.hpp"
#include "facekit/train/scheduler.hpp"

namespace facekit::train {

struct TrainConfig {
  double initial_lr = 1e-3;
  double lr_decay_factor = 0.5;
  double lr_min = 1e-6;
  int lr_patience = 3;
  int epochs = 20;
  int batch_size = 64;
  std::uint64_t seed = 0;
  bool curriculum_enabled = false;
  double curriculum_threshold = 1.0;
  std::vector<data::TaskKind> curriculum_order = {
      data::TaskKind::kGaze, data::TaskKind::kAge,
      data::TaskKind::kExpression};

  void validate() const;
  PlateauConfig plateau() const;
};

// One row per epoch. Per-task maps carry only tasks that were active and
// had at least one labeled sample on that side.
struct MetricsRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  std::vector<data::TaskKind> active_tasks;
  std::map<data::TaskKind, double> train_ce, eval_ce;
  std::map<data::TaskKind, double> train_acc, eval_acc;
  double train_total = 0.0;
  double eval_total = 0.0;
};

// A dataset lowered to model inputs: one pipeline tensor row per sample plus
// per-task target indices (-1 where the label is absent).
struct TensorDataset {
  Tensor inputs;  // N x 3HW
  TargetMap targets;
  std::size_t n = 0;
};

// Runs the pipeline over `d` (setting no_face flags) and indexes labels
// through the dataset schema. Numeric tasks are rejected.
TensorDataset make_tensor_dataset(data::Dataset& d,
                                  const preprocess::PipelineConfig& pipe);

// Grows the active prefix of `order` by one when the most recently activated
// task's eval CE is below threshold. Never shrinks; saturates at full order.
std::size_t curriculum_update(std::size_t active_count,
                              const std::map<data::TaskKind, double>& eval_ce,
                              const std::vector<data::TaskKind>& order,
                              double threshold);

// Tracks the running argmin of eval loss; offer() is true on a strict new
// minimum.
class BestTracker {
 public:
  bool offer(int epoch, double eval_loss);
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

// Aggregated eval-side statistics over a tensor dataset.
struct EvalStats {
  std::map<data::TaskKind, double> ce;
  std::map<data::TaskKind, double> acc;
  std::map<data::TaskKind, std::size_t> labeled;
  double total = 0.0;
};

EvalStats evaluate_tensors(heads::MultiTaskModel& model,
                           const TensorDataset& ds, const LossSpec& spec);

// One optimizer pass over the train split followed by one eval pass.
MetricsRecord train_epoch(heads::MultiTaskModel& model, Adam& adam,
                          const TensorDataset& train_data,
                          const TensorDataset& eval_data,
                          const TrainConfig& cfg, const LossSpec& spec,
                          int epoch, double lr);

struct FitResult {
  std::vector<MetricsRecord> records;
  int best_epoch = 0;
  double best_eval_total = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;  // snapshot in model params() order
};

// Full training run: plateau schedule and optional curriculum between
// epochs, checkpoint snapshot at every new eval-loss minimum, no early
// stopping. When checkpoint_path is non-empty the best model state is also
// written there (rewritten on each new minimum).
FitResult fit(heads::MultiTaskModel& model, const TensorDataset& train_data,
              const TensorDataset& eval_data, const TrainConfig& cfg,
              LossSpec spec, const std::string& checkpoint_path = "",
              const std::string& config_hash = "");

// Loads a fit()'s best_params snapshot back into the model.
void restore_params(heads::MultiTaskModel& model,
                    const std::vector<Tensor>& snapshot);

// One JSON object per epoch, each carrying the config hash.
void write_metrics_jsonl(const std::string& path,
                         const std::vector<MetricsRecord>& records,
                         const std::string& config_hash);
void write_summary_csv(const std::string& path,
                       const std::vector<MetricsRecord>& records);

}  // namespace facekit::train
