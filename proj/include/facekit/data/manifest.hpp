#pragma once

#include <string>
#include <utility>

#include "facekit/data/types.hpp"

namespace facekit::data {

// Reads a dataset manifest in CSV or JSONL form (chosen by file extension).
//
// CSV: header `image_path,gaze,age,expression`; an empty field means the
// sample carries no label for that task. JSONL: one object per line with the
// same keys; a missing key or empty string means no label.
//
// Image paths are interpreted relative to the manifest's directory. Rows
// whose image file does not exist are skipped and counted. Rows with a label
// outside the schema's space keep the sample but drop the offending label,
// set an `invalid_label:<task>` flag, and count it in the report.
std::pair<Dataset, LoadReport> load_manifest(const std::string& path,
                                             const LabelSchema& schema,
                                             const std::string& dataset_name);

// Writes `dataset` as a manifest at `path` (CSV or JSONL by extension).
// Image ids are written verbatim; absent labels become empty fields.
void save_manifest(const std::string& path, const Dataset& dataset);

// Splits one CSV record into fields. Handles quoted fields with doubled
// quotes; no embedded newlines.
std::vector<std::string> parse_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

}  // namespace facekit::data
