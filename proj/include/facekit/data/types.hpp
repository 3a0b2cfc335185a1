#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "facekit/data/image.hpp"

namespace facekit::data {

// The three prediction tasks. Order here is the canonical task order used
// for manifest columns and per-task output vectors.
enum class TaskKind { kGaze, kAge, kExpression };

inline constexpr TaskKind kAllTasks[] = {TaskKind::kGaze, TaskKind::kAge,
                                         TaskKind::kExpression};

const std::string& task_name(TaskKind task);
TaskKind task_from_name(const std::string& name);

// Label space for one task. Exactly one of the two modes applies:
//   - categorical: `categories` lists the class names, label values must
//     match one of them;
//   - numeric: `numeric` is true, label values must parse as real numbers
//     (used for raw ages before bucketing).
struct TaskLabelSpace {
  std::vector<std::string> categories;
  bool numeric = false;

  // Exactly one mode must be set: numeric xor categorical.
  bool valid() const { return numeric != !categories.empty(); }
  std::size_t num_classes() const { return categories.size(); }
  // Index of `value` in `categories`, or -1 when absent.
  int index_of(const std::string& value) const;
};

// Schema for a dataset: which tasks carry labels and what their spaces are.
// Tasks missing from the map are simply not annotated in that dataset.
struct LabelSchema {
  std::map<TaskKind, TaskLabelSpace> tasks;

  bool has_task(TaskKind task) const { return tasks.count(task) != 0; }
  const TaskLabelSpace& space(TaskKind task) const;
};

// One example: pixel data plus zero or more task labels. A task key absent
// from `labels` means "no annotation". `flags` accumulates per-sample
// quality notes (e.g. "invalid_label:age", "no_face") as processing runs.
struct Sample {
  std::string image_id;    // path relative to the manifest, or synthetic id
  std::string image_path;  // resolved path the image was read from, if any
  Image image;
  std::map<TaskKind, std::string> labels;
  std::string source;  // dataset name the sample originated from
  std::set<std::string> flags;

  bool has_label(TaskKind task) const { return labels.count(task) != 0; }
};

struct Dataset {
  std::string name;
  LabelSchema schema;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

// Maps label values of one task from a source space into a target space.
// Every mapping target must be a member of target_categories, which becomes
// the task's category list after the remap.
struct RemapTable {
  TaskKind task = TaskKind::kGaze;
  std::map<std::string, std::string> mapping;
  std::vector<std::string> target_categories;
};

// Bookkeeping emitted by loaders and cleaning passes.
struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t samples_loaded = 0;
  std::size_t missing_images = 0;
  std::map<std::string, std::size_t> invalid_labels;  // task name -> count

  std::size_t total_invalid_labels() const;
};

}  // namespace facekit::data
