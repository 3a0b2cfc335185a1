#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facekit/heads/model.hpp"
#include "facekit/preprocess/pipeline.hpp"
#include "facekit/train/loss.hpp"

namespace facekit::eval {

// Metrics for one task over the samples carrying that task's label.
struct TaskEval {
  double accuracy = 0.0;
  double loss = 0.0;      // mean cross-entropy over labeled samples
  std::size_t count = 0;  // labeled samples scored
  std::vector<std::string> categories;
  // confusion[gt][pred]; row sums equal per-class ground-truth counts.
  std::vector<std::vector<std::size_t>> confusion;
};

// Predicted-class distribution for a task with no usable ground truth.
struct PredHistogram {
  std::vector<std::string> categories;
  std::vector<std::size_t> counts;  // sums to n_samples
};

struct EvalReport {
  std::size_t n_samples = 0;
  std::map<data::TaskKind, TaskEval> tasks;
  std::map<data::TaskKind, PredHistogram> prediction_histograms;
  // Labels that could not be carried into the model's label space
  // (unknown category, failed remap, unparseable or negative age).
  std::map<data::TaskKind, std::size_t> excluded_unmappable;
  std::optional<double> mean_accuracy;  // over tasks with ground truth
  std::string config_hash;
};

// matches/total over pairs with a valid (non-negative) target; absent when
// there are none. Sizes must agree.
std::optional<double> per_task_accuracy(const std::vector<int>& preds,
                                        const std::vector<int>& targets);

// Deterministic eval-mode scoring. Every dataset schema task must have a
// model head with an identical category list; model tasks absent from the
// dataset schema are reported as prediction histograms.
EvalReport evaluate(heads::MultiTaskModel& model, data::Dataset& dataset,
                    const preprocess::PipelineConfig& pipeline);

// Optional handling of numeric external ages: bucket boundaries are
// upper-inclusive, bucket_names has one more entry than edges and every
// name must exist in the model's age categories (possibly via a remap).
struct OodOptions {
  std::vector<double> age_edges;
  std::vector<std::string> age_buckets;
};

// Lenient scoring of an external dataset: labels are carried into the
// model's label space through optional age bucketization and per-task remap
// tables; labels that cannot be carried over are excluded and counted.
// Tasks left without any usable ground truth appear as prediction
// histograms.
EvalReport ood_inference(heads::MultiTaskModel& model, data::Dataset& external,
                         const std::vector<data::RemapTable>& remaps,
                         const preprocess::PipelineConfig& pipeline,
                         const OodOptions& opts = {});

void write_report_json(const std::string& path, const EvalReport& report);
// One confusion CSV per scored task: <dir>/confusion_<task>.csv.
void write_confusion_csv(const std::string& dir, const EvalReport& report);

}  // namespace facekit::eval
