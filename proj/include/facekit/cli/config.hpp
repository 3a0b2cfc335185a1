#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facekit/analysis/analysis.hpp"
#include "facekit/backbone/backbone.hpp"
#include "facekit/data/types.hpp"
#include "facekit/heads/heads.hpp"
#include "facekit/preprocess/pipeline.hpp"
#include "facekit/train/trainer.hpp"

namespace facekit::cli {

// Pipeline settings in declarative form; build() instantiates the detector.
struct PipelineSettings {
  int target_h = 224;
  int target_w = 224;
  std::array<double, 3> channel_means = {0.485, 0.456, 0.406};
  std::array<double, 3> channel_stds = {0.229, 0.224, 0.225};
  bool face_mode = false;
  std::string detector = "none";

  preprocess::PipelineConfig build() const;
  std::string canonical_json() const;  // stable form for cache keys
};

// One dataset source: manifest plus the transforms applied after loading
// (bucketize, remaps, required-task cleaning, train/test split).
struct DatasetSection {
  std::string manifest;
  std::string name = "dataset";
  data::LabelSchema schema;
  std::vector<data::RemapTable> remaps;
  std::vector<double> age_edges;
  std::vector<std::string> age_bucket_names;
  std::set<data::TaskKind> required_tasks;
  double split_fraction = 0.0;  // 0 disables splitting
  std::uint64_t split_seed = 0;
};

struct GenSection {
  std::string preset = "balanced";
  std::size_t n_samples = 0;  // 0 keeps the preset default
  std::uint64_t seed = 0;     // 0 falls back to the experiment seed
  std::string out_dir;
  std::string format = "csv";
  double shift_magnitude = 0.0;
  bool emit_ood = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  DatasetSection dataset;
  std::optional<DatasetSection> eval_dataset;
  PipelineSettings pipeline;
  backbone::BackboneSpec backbone;
  heads::HeadConfig heads;
  backbone::AdaptationPolicy policy = backbone::AdaptationPolicy::kFFT;
  std::uint64_t head_init_seed = 0;
  train::LossSpec loss;
  train::TrainConfig train;
  analysis::AnalysisConfig analysis;
  GenSection gen;
  std::string checkpoint;
  std::string config_hash;  // FNV over the canonical config JSON
};

// Parses an experiment config. Relative paths resolve against base_dir.
// The hash covers the effective JSON, so flag overrides applied to the JSON
// before parsing are part of the provenance.
ExperimentConfig parse_config_json(const nlohmann::json& j,
                                   const std::string& base_dir);
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// Exclusive advisory lock on an output directory; concurrent runs against
// the same directory fail fast instead of interleaving writes.
class DirLock {
 public:
  explicit DirLock(const std::string& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

}  // namespace facekit::cli
