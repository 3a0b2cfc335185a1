#pragma once

#include <map>
#include <set>
#include <vector>

#include "facekit/backbone/params.hpp"
#include "facekit/core/tensor.hpp"
#include "facekit/data/types.hpp"

namespace facekit::train {

// Weighted multi-task objective:
//   total = sum over active tasks i of  w_i * (CE_i + lambda_i * ||W_i||^2)
// where CE_i averages over the samples labeled for task i and ||W_i||^2 runs
// over task i's head weight matrices (biases excluded).
struct LossSpec {
  std::map<data::TaskKind, double> task_weights;    // missing -> 1.0
  std::map<data::TaskKind, double> l2_coefficients;  // missing -> 0.0
  std::vector<data::TaskKind> active_tasks;

  double weight(data::TaskKind t) const;
  double lambda(data::TaskKind t) const;
  bool is_active(data::TaskKind t) const;
  void validate() const;
};

struct LossResult {
  double total = 0.0;
  std::map<data::TaskKind, double> per_task_ce;  // active tasks only
  std::map<data::TaskKind, double> l2_term;      // lambda * ||W||^2
  std::map<data::TaskKind, std::size_t> labeled_count;
  std::set<data::TaskKind> empty_tasks;  // active but unlabeled in batch
};

// Targets are per-task index vectors aligned with the logits rows; -1 marks
// a sample without that task's label (masked out of the mean).
using TargetMap = std::map<data::TaskKind, std::vector<int>>;

LossResult composite_loss(
    const std::map<data::TaskKind, Tensor>& logits, const TargetMap& targets,
    const LossSpec& spec,
    const std::vector<const backbone::Param*>& head_params);

// d(total)/d(logits) for every active task: w_i * (softmax - onehot) / n_i
// on labeled rows, zero elsewhere. Inactive tasks are omitted.
std::map<data::TaskKind, Tensor> composite_loss_grad(
    const std::map<data::TaskKind, Tensor>& logits, const TargetMap& targets,
    const LossSpec& spec);

// Adds the L2 gradient 2 * w_i * lambda_i * W into the grads of active
// tasks' head weight matrices.
void add_l2_grads(const LossSpec& spec,
                  const std::vector<backbone::Param*>& params);

// lambda_i * ||W_i||^2 for one task's head weights under current values.
double l2_term(data::TaskKind task, double lambda,
               const std::vector<const backbone::Param*>& params);

}  // namespace facekit::train
