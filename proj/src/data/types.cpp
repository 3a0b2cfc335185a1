#include "facekit/data/types.hpp"

#include "facekit/core/error.hpp"

namespace facekit::data {

const std::string& task_name(TaskKind task) {
  static const std::string names[] = {"gaze", "age", "expression"};
  return names[static_cast<int>(task)];
}

TaskKind task_from_name(const std::string& name) {
  for (TaskKind t : kAllTasks)
    if (task_name(t) == name) return t;
  throw ConfigError("unknown task name: " + name);
}

int TaskLabelSpace::index_of(const std::string& value) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == value) return static_cast<int>(i);
  return -1;
}

const TaskLabelSpace& LabelSchema::space(TaskKind task) const {
  auto it = tasks.find(task);
  if (it == tasks.end())
    throw ConfigError("schema has no task: " + task_name(task));
  return it->second;
}

std::size_t LoadReport::total_invalid_labels() const {
  std::size_t n = 0;
  for (const auto& [task, count] : invalid_labels) n += count;
  return n;
}

}  // namespace facekit::data
