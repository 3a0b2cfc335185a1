#include "facekit/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "facekit/core/error.hpp"
#include "facekit/core/rng.hpp"
#include "facekit/heads/checkpoint.hpp"

namespace facekit::train {

namespace {

// Shortest representation that round-trips a double exactly.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Tensor gather_rows(const Tensor& inputs, const std::size_t* idx,
                   std::size_t count) {
  const std::size_t d = inputs.dim(1);
  Tensor out({count, d});
  for (std::size_t r = 0; r < count; ++r)
    std::copy_n(inputs.data() + idx[r] * d, d, out.data() + r * d);
  return out;
}

TargetMap gather_targets(const TargetMap& targets, const std::size_t* idx,
                         std::size_t count) {
  TargetMap out;
  for (const auto& [task, v] : targets) {
    std::vector<int> g(count);
    for (std::size_t r = 0; r < count; ++r) g[r] = v[idx[r]];
    out[task] = std::move(g);
  }
  return out;
}

// Per-task running sums across batches. CE is re-weighted by labeled counts
// so the final mean matches a single pass over all labeled samples.
struct TaskAgg {
  double ce_sum = 0.0;
  std::size_t labeled = 0;
  std::size_t correct = 0;
};

void accumulate(std::map<data::TaskKind, TaskAgg>& agg,
                const std::map<data::TaskKind, Tensor>& logits,
                const TargetMap& targets, const LossResult& loss,
                const LossSpec& spec) {
  for (data::TaskKind task : spec.active_tasks) {
    TaskAgg& a = agg[task];
    const auto nit = loss.labeled_count.find(task);
    const std::size_t n = nit == loss.labeled_count.end() ? 0 : nit->second;
    if (n == 0) continue;
    a.ce_sum += loss.per_task_ce.at(task) * static_cast<double>(n);
    a.labeled += n;
    const std::vector<int> pred = heads::predict(logits.at(task));
    const std::vector<int>& tg = targets.at(task);
    for (std::size_t r = 0; r < pred.size(); ++r)
      if (tg[r] >= 0 && pred[r] == tg[r]) ++a.correct;
  }
}

}  // namespace

void TrainConfig::validate() const {
  check(initial_lr > 0.0, "TrainConfig: initial_lr must be positive");
  check(lr_decay_factor > 0.0 && lr_decay_factor < 1.0,
        "TrainConfig: lr_decay_factor must be in (0, 1)");
  check(lr_min > 0.0 && lr_min <= initial_lr,
        "TrainConfig: lr_min must be positive and at most initial_lr");
  check(lr_patience >= 1, "TrainConfig: lr_patience must be at least 1");
  check(epochs >= 1, "TrainConfig: epochs must be at least 1");
  check(batch_size >= 1, "TrainConfig: batch_size must be at least 1");
  if (curriculum_enabled) {
    check(!curriculum_order.empty(), "TrainConfig: empty curriculum order");
    check(curriculum_threshold > 0.0,
          "TrainConfig: curriculum_threshold must be positive");
    std::set<data::TaskKind> seen(curriculum_order.begin(),
                                  curriculum_order.end());
    check(seen.size() == curriculum_order.size(),
          "TrainConfig: curriculum order repeats a task");
  }
}

PlateauConfig TrainConfig::plateau() const {
  PlateauConfig p;
  p.initial_lr = initial_lr;
  p.factor = lr_decay_factor;
  p.min_lr = lr_min;
  p.patience = lr_patience;
  return p;
}

TensorDataset make_tensor_dataset(data::Dataset& d,
                                  const preprocess::PipelineConfig& pipe) {
  TensorDataset out;
  out.n = d.samples.size();
  const std::size_t dim = 3u * static_cast<std::size_t>(pipe.target_h) *
                          static_cast<std::size_t>(pipe.target_w);
  Tensor batch = preprocess::preprocess_dataset(d, pipe);
  batch.reshape({out.n, dim});
  out.inputs = std::move(batch);
  for (const auto& [task, space] : d.schema.tasks) {
    check(!space.numeric, "make_tensor_dataset: task '" +
                              data::task_name(task) +
                              "' is numeric; targets require categories");
    std::vector<int> t(out.n, -1);
    for (std::size_t i = 0; i < out.n; ++i) {
      const auto it = d.samples[i].labels.find(task);
      if (it == d.samples[i].labels.end()) continue;
      const int idx = space.index_of(it->second);
      if (idx < 0)
        throw DataError("make_tensor_dataset: label '" + it->second +
                        "' is outside the schema for task " +
                        data::task_name(task));
      t[i] = idx;
    }
    out.targets[task] = std::move(t);
  }
  return out;
}

std::size_t curriculum_update(std::size_t active_count,
                              const std::map<data::TaskKind, double>& eval_ce,
                              const std::vector<data::TaskKind>& order,
                              double threshold) {
  check(active_count >= 1 && active_count <= order.size(),
        "curriculum_update: active_count out of range");
  if (active_count == order.size()) return active_count;
  const auto it = eval_ce.find(order[active_count - 1]);
  if (it != eval_ce.end() && it->second < threshold) return active_count + 1;
  return active_count;
}

bool BestTracker::offer(int epoch, double eval_loss) {
  if (eval_loss < best_loss_) {
    best_loss_ = eval_loss;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

EvalStats evaluate_tensors(heads::MultiTaskModel& model,
                           const TensorDataset& ds, const LossSpec& spec) {
  constexpr std::size_t kChunk = 256;
  std::map<data::TaskKind, TaskAgg> agg;
  std::vector<std::size_t> idx(std::min(kChunk, ds.n));
  for (std::size_t start = 0; start < ds.n; start += kChunk) {
    const std::size_t stop = std::min(ds.n, start + kChunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor batch = gather_rows(ds.inputs, idx.data(), idx.size());
    const TargetMap bt = gather_targets(ds.targets, idx.data(), idx.size());
    const auto logits =
        model.forward(batch, /*training=*/false, nullptr, /*grad_enabled=*/false);
    const LossResult res = composite_loss(logits, bt, spec, model.const_params());
    accumulate(agg, logits, bt, res, spec);
  }
  EvalStats out;
  const auto params = model.const_params();
  for (data::TaskKind task : spec.active_tasks) {
    const auto it = agg.find(task);
    const std::size_t n = it == agg.end() ? 0 : it->second.labeled;
    double ce = 0.0;
    if (n > 0) {
      ce = it->second.ce_sum / static_cast<double>(n);
      out.ce[task] = ce;
      out.acc[task] =
          static_cast<double>(it->second.correct) / static_cast<double>(n);
      out.labeled[task] = n;
    }
    out.total += spec.weight(task) *
                 (ce + l2_term(task, spec.lambda(task), params));
  }
  return out;
}

MetricsRecord train_epoch(heads::MultiTaskModel& model, Adam& adam,
                          const TensorDataset& train_data,
                          const TensorDataset& eval_data,
                          const TrainConfig& cfg, const LossSpec& spec,
                          int epoch, double lr) {
  // One deterministic stream per (seed, epoch) drives both the shuffle and
  // every dropout mask of the epoch.
  Rng rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
  std::vector<std::size_t> perm(train_data.n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);

  std::map<data::TaskKind, TaskAgg> agg;
  double total_sum = 0.0;
  std::size_t batches = 0;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < train_data.n; start += bs) {
    const std::size_t stop = std::min(train_data.n, start + bs);
    const Tensor batch =
        gather_rows(train_data.inputs, perm.data() + start, stop - start);
    const TargetMap bt =
        gather_targets(train_data.targets, perm.data() + start, stop - start);
    model.zero_grads();
    const auto logits =
        model.forward(batch, /*training=*/true, &rng, /*grad_enabled=*/true);
    const LossResult res =
        composite_loss(logits, bt, spec, model.const_params());
    model.backward(composite_loss_grad(logits, bt, spec));
    auto params = model.params();
    add_l2_grads(spec, params);
    adam.step(lr);
    accumulate(agg, logits, bt, res, spec);
    total_sum += res.total;
    ++batches;
  }

  MetricsRecord rec;
  rec.epoch = epoch;
  rec.lr = lr;
  rec.active_tasks = spec.active_tasks;
  rec.train_total =
      batches > 0 ? total_sum / static_cast<double>(batches) : 0.0;
  for (data::TaskKind task : spec.active_tasks) {
    const auto it = agg.find(task);
    if (it == agg.end() || it->second.labeled == 0) continue;
    rec.train_ce[task] =
        it->second.ce_sum / static_cast<double>(it->second.labeled);
    rec.train_acc[task] = static_cast<double>(it->second.correct) /
                          static_cast<double>(it->second.labeled);
  }
  const EvalStats es = evaluate_tensors(model, eval_data, spec);
  rec.eval_ce = es.ce;
  rec.eval_acc = es.acc;
  rec.eval_total = es.total;
  if (!std::isfinite(rec.train_total) || !std::isfinite(rec.eval_total))
    throw NumericError("train_epoch: non-finite loss at epoch " +
                       std::to_string(epoch));
  return rec;
}

FitResult fit(heads::MultiTaskModel& model, const TensorDataset& train_data,
              const TensorDataset& eval_data, const TrainConfig& cfg,
              LossSpec spec, const std::string& checkpoint_path,
              const std::string& config_hash) {
  cfg.validate();
  check(train_data.n > 0, "fit: empty training set");
  check(eval_data.n > 0, "fit: empty evaluation set");

  std::vector<data::TaskKind> order;
  std::size_t active_count = 0;
  if (cfg.curriculum_enabled) {
    order = cfg.curriculum_order;
    active_count = 1;
  } else {
    order = spec.active_tasks.empty() ? model.tasks() : spec.active_tasks;
    active_count = order.size();
  }
  check(!order.empty(), "fit: no tasks to train");
  for (data::TaskKind t : order)
    check(model.schema().has_task(t),
          "fit: task '" + data::task_name(t) + "' is not in the model schema");

  Adam adam(model.params(), model.mask());
  PlateauScheduler sched(cfg.plateau());
  BestTracker best;
  FitResult out;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    spec.active_tasks.assign(order.begin(),
                             order.begin() + static_cast<long>(active_count));
    MetricsRecord rec = train_epoch(model, adam, train_data, eval_data, cfg,
                                    spec, epoch, sched.lr());
    sched.step(rec.eval_total);
    if (cfg.curriculum_enabled)
      active_count = curriculum_update(active_count, rec.eval_ce, order,
                                       cfg.curriculum_threshold);
    if (best.offer(epoch, rec.eval_total)) {
      out.best_epoch = epoch;
      out.best_eval_total = rec.eval_total;
      out.best_params.clear();
      for (const backbone::Param* p : model.const_params())
        out.best_params.push_back(p->value);
      if (!checkpoint_path.empty())
        heads::save_checkpoint(checkpoint_path, model, config_hash);
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

void restore_params(heads::MultiTaskModel& model,
                    const std::vector<Tensor>& snapshot) {
  auto params = model.params();
  check(params.size() == snapshot.size(),
        "restore_params: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    check(params[i]->value.shape() == snapshot[i].shape(),
          "restore_params: shape mismatch at " + params[i]->name);
    params[i]->value = snapshot[i];
  }
}

void write_metrics_jsonl(const std::string& path,
                         const std::vector<MetricsRecord>& records,
                         const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_metrics_jsonl: cannot open " + path);
  for (const MetricsRecord& r : records) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["lr"] = r.lr;
    auto active = nlohmann::ordered_json::array();
    for (data::TaskKind t : r.active_tasks) active.push_back(data::task_name(t));
    j["active"] = std::move(active);
    auto side = [&](const std::map<data::TaskKind, double>& ce,
                    const std::map<data::TaskKind, double>& acc) {
      auto o = nlohmann::ordered_json::object();
      for (data::TaskKind t : r.active_tasks) {
        auto tj = nlohmann::ordered_json::object();
        if (const auto it = ce.find(t); it != ce.end()) tj["loss"] = it->second;
        if (const auto it = acc.find(t); it != acc.end())
          tj["accuracy"] = it->second;
        o[data::task_name(t)] = std::move(tj);
      }
      return o;
    };
    j["train"] = side(r.train_ce, r.train_acc);
    j["eval"] = side(r.eval_ce, r.eval_acc);
    j["train_total"] = r.train_total;
    j["eval_total"] = r.eval_total;
    j["config_hash"] = config_hash;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write_metrics_jsonl: write failed for " + path);
}

void write_summary_csv(const std::string& path,
                       const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_summary_csv: cannot open " + path);
  out << "epoch,lr,active,train_total,eval_total";
  for (data::TaskKind t : data::kAllTasks) {
    const std::string n = data::task_name(t);
    out << "," << n << "_train_loss," << n << "_train_acc," << n
        << "_eval_loss," << n << "_eval_acc";
  }
  out << "\n";
  for (const MetricsRecord& r : records) {
    out << r.epoch << "," << fmt_double(r.lr) << ",";
    for (std::size_t i = 0; i < r.active_tasks.size(); ++i) {
      if (i > 0) out << "+";
      out << data::task_name(r.active_tasks[i]);
    }
    out << "," << fmt_double(r.train_total) << ","
        << fmt_double(r.eval_total);
    auto cell = [&](const std::map<data::TaskKind, double>& m,
                    data::TaskKind t) {
      out << ",";
      if (const auto it = m.find(t); it != m.end()) out << fmt_double(it->second);
    };
    for (data::TaskKind t : data::kAllTasks) {
      cell(r.train_ce, t);
      cell(r.train_acc, t);
      cell(r.eval_ce, t);
      cell(r.eval_acc, t);
    }
    out << "\n";
  }
  if (!out) throw IoError("write_summary_csv: write failed for " + path);
}

}  // namespace facekit::train
