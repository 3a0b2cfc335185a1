#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "facekit/data/types.hpp"

namespace facekit::data {

// All operations are pure: the input dataset is left untouched and a new one
// is returned.

// Keeps only samples whose labels cover every task in required_tasks.
Dataset clean_dataset(const Dataset& d, const std::set<TaskKind>& required);

// Replaces numeric age labels by bucket categories. targets must have one
// more entry than edges; a value v lands in the first bucket i with
// v <= edges[i], otherwise the last bucket (upper edges are inclusive).
// Negative ages drop the label and flag the sample "negative_age".
Dataset bucketize_age(const Dataset& d, const std::vector<double>& edges,
                      const std::vector<std::string>& targets);

// Rewrites every label of t.task through t.mapping. A labeled source value
// absent from the table is a configuration error naming the value. The
// task's schema becomes t.target_categories.
Dataset remap_labels(const Dataset& d, const RemapTable& t);

// Remaps each source dataset into the unified schema (one table per task the
// source annotates) and concatenates them in order. Sample `source` tags are
// preserved.
Dataset merge_datasets(const std::vector<Dataset>& sources,
                       const std::vector<std::vector<RemapTable>>& tables,
                       const LabelSchema& unified, const std::string& name);

// Deterministic permutation of the samples for a given seed.
Dataset shuffle_dataset(const Dataset& d, std::uint64_t seed);

// Shuffles with `seed`, then cuts at floor(train_fraction * N). Requires
// 0 < train_fraction < 1 and at least two samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d,
                                          double train_fraction,
                                          std::uint64_t seed);

}  // namespace facekit::data
