#include "facekit/data/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "facekit/core/error.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace facekit::data {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// True when `value` parses in full as a finite real number.
bool is_number(const std::string& value) {
  if (value.empty()) return false;
  std::size_t pos = 0;
  try {
    const double v = std::stod(value, &pos);
    return pos == value.size() && std::isfinite(v);
  } catch (const std::exception&) {
    return false;
  }
}

// Validates one raw label value against the schema. Returns true when the
// label should be kept on the sample.
bool accept_label(const LabelSchema& schema, TaskKind task,
                  const std::string& value) {
  if (!schema.has_task(task)) return false;
  const TaskLabelSpace& space = schema.space(task);
  if (space.numeric) return is_number(value);
  return space.index_of(value) >= 0;
}

void ingest_row(Dataset& out, LoadReport& report, const fs::path& base_dir,
                const std::string& image_rel,
                const std::map<TaskKind, std::string>& raw_labels) {
  ++report.rows_read;
  const fs::path resolved = base_dir / image_rel;
  if (!fs::exists(resolved)) {
    ++report.missing_images;
    return;
  }
  Sample s;
  s.image_id = image_rel;
  s.image_path = resolved.string();
  s.image = read_ppm(s.image_path);
  s.source = out.name;
  for (const auto& [task, value] : raw_labels) {
    if (value.empty()) continue;
    if (accept_label(out.schema, task, value)) {
      s.labels[task] = value;
    } else {
      ++report.invalid_labels[task_name(task)];
      s.flags.insert("invalid_label:" + task_name(task));
    }
  }
  out.samples.push_back(std::move(s));
  ++report.samples_loaded;
}

std::pair<Dataset, LoadReport> load_csv(const std::string& path,
                                        const LabelSchema& schema,
                                        const std::string& dataset_name) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  Dataset out;
  out.name = dataset_name;
  out.schema = schema;
  LoadReport report;

  std::string line;
  if (!std::getline(in, line))
    throw DataError("empty manifest: " + path);
  const std::vector<std::string> header = parse_csv_line(line);
  if (header.size() != 4 || header[0] != "image_path" ||
      header[1] != "gaze" || header[2] != "age" || header[3] != "expression")
    throw DataError("bad manifest header in " + path +
                    " (want image_path,gaze,age,expression)");

  const fs::path base_dir = fs::path(path).parent_path();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> fields = parse_csv_line(line);
    if (fields.size() != 4)
      throw DataError("manifest row with " + std::to_string(fields.size()) +
                      " fields (want 4) in " + path);
    ingest_row(out, report, base_dir, fields[0],
               {{TaskKind::kGaze, fields[1]},
                {TaskKind::kAge, fields[2]},
                {TaskKind::kExpression, fields[3]}});
  }
  return {std::move(out), report};
}

std::pair<Dataset, LoadReport> load_jsonl(const std::string& path,
                                          const LabelSchema& schema,
                                          const std::string& dataset_name) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  Dataset out;
  out.name = dataset_name;
  out.schema = schema;
  LoadReport report;

  const fs::path base_dir = fs::path(path).parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("bad JSON on line " + std::to_string(line_no) + " of " +
                      path + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("image_path") ||
        !row["image_path"].is_string())
      throw DataError("manifest line " + std::to_string(line_no) +
                      " lacks image_path: " + path);
    std::map<TaskKind, std::string> raw;
    for (TaskKind t : kAllTasks) {
      const std::string key = task_name(t);
      if (row.contains(key) && row[key].is_string())
        raw[t] = row[key].get<std::string>();
      else
        raw[t] = "";
    }
    ingest_row(out, report, base_dir, row["image_path"].get<std::string>(),
               raw);
  }
  return {std::move(out), report};
}

}  // namespace

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::pair<Dataset, LoadReport> load_manifest(const std::string& path,
                                             const LabelSchema& schema,
                                             const std::string& dataset_name) {
  for (const auto& [task, space] : schema.tasks)
    if (!space.valid())
      throw ConfigError("label space for task '" + task_name(task) +
                        "' must be categorical or numeric, not both");
  if (ends_with(path, ".csv")) return load_csv(path, schema, dataset_name);
  if (ends_with(path, ".jsonl")) return load_jsonl(path, schema, dataset_name);
  throw ConfigError("manifest must be .csv or .jsonl: " + path);
}

void save_manifest(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  auto label_or_empty = [](const Sample& s, TaskKind t) {
    auto it = s.labels.find(t);
    return it == s.labels.end() ? std::string() : it->second;
  };
  if (ends_with(path, ".csv")) {
    out << "image_path,gaze,age,expression\n";
    for (const Sample& s : dataset.samples) {
      out << csv_escape(s.image_id);
      for (TaskKind t : kAllTasks)
        out << "," << csv_escape(label_or_empty(s, t));
      out << "\n";
    }
  } else if (ends_with(path, ".jsonl")) {
    for (const Sample& s : dataset.samples) {
      json row;
      row["image_path"] = s.image_id;
      for (TaskKind t : kAllTasks) {
        const std::string v = label_or_empty(s, t);
        if (!v.empty()) row[task_name(t)] = v;
      }
      out << row.dump() << "\n";
    }
  } else {
    throw ConfigError("manifest must be .csv or .jsonl: " + path);
  }
  if (!out) throw IoError("short write on manifest: " + path);
}

}  // namespace facekit::data
