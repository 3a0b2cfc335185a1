#include "facekit/train/loss.hpp"

#include <cmath>

#include "facekit/core/error.hpp"

namespace facekit::train {

namespace {

bool is_head_weight(const backbone::Param& p, const std::string& head_block) {
  if (p.block != head_block) return false;
  const std::size_t dot = p.name.rfind('.');
  return dot != std::string::npos && dot + 1 < p.name.size() &&
         p.name[dot + 1] == 'w';
}

// log(sum(exp(row))) with max-shift stabilization.
double log_sum_exp(const double* row, std::size_t c) {
  double mx = row[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
  return mx + std::log(sum);
}

}  // namespace

double LossSpec::weight(data::TaskKind t) const {
  auto it = task_weights.find(t);
  return it == task_weights.end() ? 1.0 : it->second;
}

double LossSpec::lambda(data::TaskKind t) const {
  auto it = l2_coefficients.find(t);
  return it == l2_coefficients.end() ? 0.0 : it->second;
}

bool LossSpec::is_active(data::TaskKind t) const {
  for (data::TaskKind a : active_tasks)
    if (a == t) return true;
  return false;
}

void LossSpec::validate() const {
  check(!active_tasks.empty(), "loss spec needs a non-empty active task set");
  for (const auto& [t, w] : task_weights)
    check(w >= 0.0, "task weights must be non-negative");
  for (const auto& [t, l] : l2_coefficients)
    check(l >= 0.0, "l2 coefficients must be non-negative");
}

double l2_term(data::TaskKind task, double lambda,
               const std::vector<const backbone::Param*>& params) {
  if (lambda == 0.0) return 0.0;
  const std::string block = "head." + data::task_name(task);
  double acc = 0.0;
  for (const backbone::Param* p : params) {
    if (!is_head_weight(*p, block)) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i)
      acc += p->value[i] * p->value[i];
  }
  return lambda * acc;
}

LossResult composite_loss(
    const std::map<data::TaskKind, Tensor>& logits, const TargetMap& targets,
    const LossSpec& spec,
    const std::vector<const backbone::Param*>& head_params) {
  spec.validate();
  LossResult result;
  for (data::TaskKind t : spec.active_tasks) {
    auto lit = logits.find(t);
    check(lit != logits.end(),
          "no logits for active task " + data::task_name(t));
    const Tensor& lg = lit->second;
    const std::size_t n = lg.dim(0);
    const std::size_t c = lg.dim(1);
    auto tit = targets.find(t);
    check(tit != targets.end() && tit->second.size() == n,
          "targets missing or misaligned for task " + data::task_name(t));

    double ce_sum = 0.0;
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int y = tit->second[i];
      if (y < 0) continue;
      check(static_cast<std::size_t>(y) < c,
            "target index out of range for task " + data::task_name(t));
      const double* row = lg.data() + i * c;
      ce_sum += log_sum_exp(row, c) - row[y];
      ++labeled;
    }
    const double ce = labeled > 0 ? ce_sum / static_cast<double>(labeled) : 0.0;
    if (labeled == 0) result.empty_tasks.insert(t);
    const double l2 = l2_term(t, spec.lambda(t), head_params);
    result.per_task_ce[t] = ce;
    result.l2_term[t] = l2;
    result.labeled_count[t] = labeled;
    result.total += spec.weight(t) * (ce + l2);
  }
  if (!std::isfinite(result.total))
    throw NumericError("composite loss is not finite");
  return result;
}

std::map<data::TaskKind, Tensor> composite_loss_grad(
    const std::map<data::TaskKind, Tensor>& logits, const TargetMap& targets,
    const LossSpec& spec) {
  std::map<data::TaskKind, Tensor> grads;
  for (data::TaskKind t : spec.active_tasks) {
    const Tensor& lg = logits.at(t);
    const std::size_t n = lg.dim(0);
    const std::size_t c = lg.dim(1);
    const std::vector<int>& tg = targets.at(t);

    std::size_t labeled = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (tg[i] >= 0) ++labeled;

    Tensor d({n, c});
    if (labeled > 0) {
      const double scale = spec.weight(t) / static_cast<double>(labeled);
      for (std::size_t i = 0; i < n; ++i) {
        if (tg[i] < 0) continue;
        const double* row = lg.data() + i * c;
        double* drow = d.data() + i * c;
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          drow[j] = std::exp(row[j] - mx);
          sum += drow[j];
        }
        for (std::size_t j = 0; j < c; ++j) drow[j] = drow[j] / sum * scale;
        drow[tg[i]] -= scale;
      }
    }
    grads[t] = std::move(d);
  }
  return grads;
}

void add_l2_grads(const LossSpec& spec,
                  const std::vector<backbone::Param*>& params) {
  for (data::TaskKind t : spec.active_tasks) {
    const double coeff = 2.0 * spec.weight(t) * spec.lambda(t);
    if (coeff == 0.0) continue;
    const std::string block = "head." + data::task_name(t);
    for (backbone::Param* p : params) {
      if (!is_head_weight(*p, block)) continue;
      for (std::size_t i = 0; i < p->value.size(); ++i)
        p->grad[i] += coeff * p->value[i];
    }
  }
}

}  // namespace facekit::train
