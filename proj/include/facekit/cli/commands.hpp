#pragma once

#include <string>

#include "facekit/cli/config.hpp"
#include "facekit/core/tensor.hpp"

namespace facekit::cli {

// Subcommand bodies. Each validates the config fields it needs, takes the
// output-directory lock, writes its artifacts (every one stamped with the
// config hash), and returns 0; failures throw.
int run_gen(const ExperimentConfig& cfg);
int run_preprocess(const ExperimentConfig& cfg);
int run_train(const ExperimentConfig& cfg);
int run_eval(const ExperimentConfig& cfg);
int run_ood(const ExperimentConfig& cfg);
int run_analyze(const ExperimentConfig& cfg);
int run_report(const ExperimentConfig& cfg);

// Preprocess cache. Tensors are keyed by the manifest's bytes and the
// pipeline settings; the root comes from FACEKIT_CACHE (default
// ".facekit-cache").
std::string cache_root();
std::string cache_key(const std::string& manifest_path,
                      const PipelineSettings& pipe);

// FKTENS1 container: magic, rank, dims, then raw little-endian doubles.
void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

}  // namespace facekit::cli
