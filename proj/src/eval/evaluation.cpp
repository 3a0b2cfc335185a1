#include "facekit/eval/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "facekit/core/error.hpp"
#include "facekit/train/trainer.hpp"

namespace facekit::eval {

namespace {

double log_sum_exp(const double* row, std::size_t c) {
  double mx = row[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
  return mx + std::log(sum);
}

// Upper-inclusive bucket boundaries: the first edge at or above the value
// picks the bucket, values above every edge land in the last one.
const std::string& bucket_of(double v, const OodOptions& opts) {
  for (std::size_t i = 0; i < opts.age_edges.size(); ++i)
    if (v <= opts.age_edges[i]) return opts.age_buckets[i];
  return opts.age_buckets.back();
}

// Chunked eval-mode forwards over a lowered dataset, then per-task metrics
// where valid targets exist and prediction histograms where none do.
EvalReport score(heads::MultiTaskModel& model, const Tensor& inputs,
                 const train::TargetMap& targets, std::size_t n) {
  EvalReport rep;
  rep.n_samples = n;
  const std::vector<data::TaskKind> tasks = model.tasks();
  std::map<data::TaskKind, std::vector<int>> preds;
  std::map<data::TaskKind, double> ce_sum;
  for (data::TaskKind t : tasks) preds[t].reserve(n);

  constexpr std::size_t kChunk = 256;
  const std::size_t d = n > 0 ? inputs.dim(1) : 0;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t stop = std::min(n, start + kChunk);
    Tensor batch({stop - start, d});
    std::copy_n(inputs.data() + start * d, (stop - start) * d, batch.data());
    const auto logits =
        model.forward(batch, /*training=*/false, nullptr, /*grad_enabled=*/false);
    for (data::TaskKind t : tasks) {
      const Tensor& lg = logits.at(t);
      const std::vector<int> p = heads::predict(lg);
      if (const auto tit = targets.find(t); tit != targets.end()) {
        const std::size_t c = lg.dim(1);
        for (std::size_t r = 0; r < p.size(); ++r) {
          const int y = tit->second[start + r];
          if (y < 0) continue;
          const double* row = lg.data() + r * c;
          ce_sum[t] += log_sum_exp(row, c) - row[y];
        }
      }
      preds[t].insert(preds[t].end(), p.begin(), p.end());
    }
  }

  double acc_sum = 0.0;
  std::size_t acc_n = 0;
  for (data::TaskKind t : tasks) {
    const auto& cats = model.schema().space(t).categories;
    const std::size_t c = cats.size();
    const auto tit = targets.find(t);
    std::size_t labeled = 0;
    if (tit != targets.end())
      for (int y : tit->second)
        if (y >= 0) ++labeled;
    if (labeled > 0) {
      TaskEval te;
      te.categories = cats;
      te.count = labeled;
      te.confusion.assign(c, std::vector<std::size_t>(c, 0));
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const int y = tit->second[i];
        if (y < 0) continue;
        const int p = preds[t][i];
        ++te.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
        if (p == y) ++correct;
      }
      te.accuracy = static_cast<double>(correct) / static_cast<double>(labeled);
      te.loss = ce_sum[t] / static_cast<double>(labeled);
      acc_sum += te.accuracy;
      ++acc_n;
      rep.tasks[t] = std::move(te);
    } else {
      PredHistogram h;
      h.categories = cats;
      h.counts.assign(c, 0);
      for (int p : preds[t]) ++h.counts[static_cast<std::size_t>(p)];
      rep.prediction_histograms[t] = std::move(h);
    }
  }
  if (acc_n > 0) rep.mean_accuracy = acc_sum / static_cast<double>(acc_n);
  return rep;
}

}  // namespace

std::optional<double> per_task_accuracy(const std::vector<int>& preds,
                                        const std::vector<int>& targets) {
  check(preds.size() == targets.size(),
        "per_task_accuracy: prediction/target size mismatch");
  std::size_t valid = 0, match = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (targets[i] < 0) continue;
    ++valid;
    if (preds[i] == targets[i]) ++match;
  }
  if (valid == 0) return std::nullopt;
  return static_cast<double>(match) / static_cast<double>(valid);
}

EvalReport evaluate(heads::MultiTaskModel& model, data::Dataset& dataset,
                    const preprocess::PipelineConfig& pipeline) {
  for (const auto& [task, space] : dataset.schema.tasks) {
    check(model.schema().has_task(task), "evaluate: dataset task '" +
                                             data::task_name(task) +
                                             "' has no model head");
    const auto& ms = model.schema().space(task);
    if (space.numeric || space.categories != ms.categories)
      throw ConfigError("evaluate: schema mismatch for task '" +
                        data::task_name(task) + "'");
  }
  const train::TensorDataset td = train::make_tensor_dataset(dataset, pipeline);
  return score(model, td.inputs, td.targets, td.n);
}

EvalReport ood_inference(heads::MultiTaskModel& model, data::Dataset& external,
                         const std::vector<data::RemapTable>& remaps,
                         const preprocess::PipelineConfig& pipeline,
                         const OodOptions& opts) {
  std::map<data::TaskKind, const data::RemapTable*> table;
  for (const data::RemapTable& t : remaps) {
    check(table.count(t.task) == 0, "ood_inference: duplicate remap table for task " +
                                        data::task_name(t.task));
    table[t.task] = &t;
  }
  if (!opts.age_edges.empty() || !opts.age_buckets.empty()) {
    check(opts.age_buckets.size() == opts.age_edges.size() + 1,
          "ood_inference: age bucket names must number edges + 1");
    check(std::is_sorted(opts.age_edges.begin(), opts.age_edges.end()),
          "ood_inference: age edges must be ascending");
  }

  const std::size_t n = external.samples.size();
  const std::size_t dim = 3u * static_cast<std::size_t>(pipeline.target_h) *
                          static_cast<std::size_t>(pipeline.target_w);
  Tensor inputs = preprocess::preprocess_dataset(external, pipeline);
  inputs.reshape({n, dim});

  train::TargetMap targets;
  std::map<data::TaskKind, std::size_t> excluded;
  for (data::TaskKind task : model.tasks()) {
    if (!external.schema.has_task(task)) continue;
    const auto& ext_space = external.schema.space(task);
    const auto& model_space = model.schema().space(task);
    const bool numeric = ext_space.numeric;
    if (numeric) {
      check(task == data::TaskKind::kAge,
            "ood_inference: numeric labels are only supported for age");
      check(!opts.age_buckets.empty(),
            "ood_inference: numeric ages require bucket options");
    }
    std::vector<int> tv(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = external.samples[i].labels.find(task);
      if (it == external.samples[i].labels.end()) continue;
      std::string value = it->second;
      bool ok = true;
      if (numeric) {
        try {
          std::size_t pos = 0;
          const double v = std::stod(value, &pos);
          ok = pos == value.size() && std::isfinite(v) && v >= 0.0;
          if (ok) value = bucket_of(v, opts);
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (ok && table.count(task) != 0) {
        const auto mit = table[task]->mapping.find(value);
        if (mit == table[task]->mapping.end())
          ok = false;
        else
          value = mit->second;
      }
      const int idx = ok ? model_space.index_of(value) : -1;
      if (idx < 0) {
        ++excluded[task];
        continue;
      }
      tv[i] = idx;
    }
    targets[task] = std::move(tv);
  }

  EvalReport rep = score(model, inputs, targets, n);
  rep.excluded_unmappable = std::move(excluded);
  return rep;
}

void write_report_json(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_report_json: cannot open " + path);
  nlohmann::ordered_json j;
  j["n_samples"] = report.n_samples;
  if (report.mean_accuracy) j["mean_accuracy"] = *report.mean_accuracy;
  auto tasks = nlohmann::ordered_json::object();
  for (const auto& [task, te] : report.tasks) {
    nlohmann::ordered_json tj;
    tj["accuracy"] = te.accuracy;
    tj["loss"] = te.loss;
    tj["count"] = te.count;
    tj["categories"] = te.categories;
    tj["confusion"] = te.confusion;
    tasks[data::task_name(task)] = std::move(tj);
  }
  j["tasks"] = std::move(tasks);
  auto hist = nlohmann::ordered_json::object();
  for (const auto& [task, h] : report.prediction_histograms) {
    nlohmann::ordered_json hj;
    hj["categories"] = h.categories;
    hj["counts"] = h.counts;
    hist[data::task_name(task)] = std::move(hj);
  }
  j["prediction_histograms"] = std::move(hist);
  if (!report.excluded_unmappable.empty()) {
    auto ex = nlohmann::ordered_json::object();
    for (const auto& [task, c] : report.excluded_unmappable)
      ex[data::task_name(task)] = c;
    j["excluded_unmappable"] = std::move(ex);
  }
  j["config_hash"] = report.config_hash;
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write_report_json: write failed for " + path);
}

void write_confusion_csv(const std::string& dir, const EvalReport& report) {
  for (const auto& [task, te] : report.tasks) {
    const std::string path =
        dir + "/confusion_" + data::task_name(task) + ".csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_confusion_csv: cannot open " + path);
    out << "gt\\pred";
    for (const std::string& c : te.categories) out << "," << c;
    out << "\n";
    for (std::size_t r = 0; r < te.confusion.size(); ++r) {
      out << te.categories[r];
      for (std::size_t c = 0; c < te.confusion[r].size(); ++c)
        out << "," << te.confusion[r][c];
      out << "\n";
    }
    if (!out) throw IoError("write_confusion_csv: write failed for " + path);
  }
}

}  // namespace facekit::eval
