#include "facekit/data/ops.hpp"

#include <algorithm>
#include <cmath>

#include "facekit/core/error.hpp"
#include "facekit/core/rng.hpp"

namespace facekit::data {

Dataset clean_dataset(const Dataset& d, const std::set<TaskKind>& required) {
  Dataset out;
  out.name = d.name;
  out.schema = d.schema;
  for (const Sample& s : d.samples) {
    bool keep = true;
    for (TaskKind t : required) {
      if (!s.has_label(t)) {
        keep = false;
        break;
      }
    }
    if (keep) out.samples.push_back(s);
  }
  return out;
}

Dataset bucketize_age(const Dataset& d, const std::vector<double>& edges,
                      const std::vector<std::string>& targets) {
  check(targets.size() == edges.size() + 1,
        "bucketize_age needs len(targets) = len(edges) + 1");
  check(std::is_sorted(edges.begin(), edges.end()),
        "bucketize_age edges must be ascending");
  Dataset out;
  out.name = d.name;
  out.schema = d.schema;
  TaskLabelSpace age_space;
  age_space.categories = targets;
  out.schema.tasks[TaskKind::kAge] = age_space;

  for (Sample s : d.samples) {
    auto it = s.labels.find(TaskKind::kAge);
    if (it != s.labels.end()) {
      double v = 0.0;
      try {
        v = std::stod(it->second);
      } catch (const std::exception&) {
        throw DataError("bucketize_age on non-numeric age label '" +
                        it->second + "'");
      }
      if (v < 0.0) {
        s.labels.erase(it);
        s.flags.insert("negative_age");
      } else {
        std::size_t bucket = edges.size();
        for (std::size_t i = 0; i < edges.size(); ++i) {
          if (v <= edges[i]) {
            bucket = i;
            break;
          }
        }
        it->second = targets[bucket];
      }
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

Dataset remap_labels(const Dataset& d, const RemapTable& t) {
  for (const auto& [src, dst] : t.mapping) {
    if (std::find(t.target_categories.begin(), t.target_categories.end(),
                  dst) == t.target_categories.end())
      throw ConfigError("remap target '" + dst + "' for task '" +
                        task_name(t.task) + "' is not in target_categories");
  }
  Dataset out;
  out.name = d.name;
  out.schema = d.schema;
  TaskLabelSpace space;
  space.categories = t.target_categories;
  out.schema.tasks[t.task] = space;

  for (Sample s : d.samples) {
    auto it = s.labels.find(t.task);
    if (it != s.labels.end()) {
      auto m = t.mapping.find(it->second);
      if (m == t.mapping.end())
        throw ConfigError("no remap entry for task '" + task_name(t.task) +
                          "' source category '" + it->second + "'");
      it->second = m->second;
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

Dataset merge_datasets(const std::vector<Dataset>& sources,
                       const std::vector<std::vector<RemapTable>>& tables,
                       const LabelSchema& unified, const std::string& name) {
  check(sources.size() == tables.size(),
        "merge_datasets needs one table set per source");
  Dataset out;
  out.name = name;
  out.schema = unified;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Dataset remapped = sources[i];
    for (const RemapTable& t : tables[i]) remapped = remap_labels(remapped, t);
    for (const Sample& s : remapped.samples) {
      for (const auto& [task, value] : s.labels) {
        if (!unified.has_task(task) ||
            unified.space(task).index_of(value) < 0)
          throw ConfigError("merged label '" + value + "' for task '" +
                            task_name(task) +
                            "' is outside the unified schema (source '" +
                            sources[i].name + "')");
      }
      out.samples.push_back(s);
    }
  }
  return out;
}

Dataset shuffle_dataset(const Dataset& d, std::uint64_t seed) {
  Dataset out = d;
  Rng rng(seed);
  rng.shuffle(out.samples);
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d,
                                          double train_fraction,
                                          std::uint64_t seed) {
  check(train_fraction > 0.0 && train_fraction < 1.0,
        "split_dataset needs 0 < train_fraction < 1");
  if (d.size() < 2)
    throw DataError("split_dataset needs at least two samples");
  Dataset shuffled = shuffle_dataset(d, seed);
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(shuffled.size())));
  Dataset train, test;
  train.name = d.name + "_train";
  test.name = d.name + "_test";
  train.schema = d.schema;
  test.schema = d.schema;
  train.samples.assign(shuffled.samples.begin(),
                       shuffled.samples.begin() + n_train);
  test.samples.assign(shuffled.samples.begin() + n_train,
                      shuffled.samples.end());
  return {std::move(train), std::move(test)};
}

}  // namespace facekit::data
