#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "facekit/core/tensor.hpp"
#include "facekit/data/types.hpp"
#include "facekit/preprocess/pipeline.hpp"

namespace facekit::analysis {

struct AnalysisConfig {
  double perplexity = 30.0;
  std::uint64_t seed = 0;
  std::size_t subsample_cap = 1000;  // equal-portion cap per source
  std::string color_reduction = "row_mean";  // or "row_median"
  std::string normalization = "minmax";      // or "zscore"
  int tsne_max_iter = 500;
  double tsne_learning_rate = 200.0;

  void validate() const;
};

// Pipeline tensors flattened row-major: row i is sample i, D = 3*H*W.
Tensor flatten_images(data::Dataset& d, const preprocess::PipelineConfig& pipe);

// Pairwise L2 distances min-max normalized to [0,1] over the off-diagonal
// entries; the diagonal stays 0. When every off-diagonal entry is equal the
// normalization is degenerate: all-zero distances produce a zero matrix,
// equal nonzero distances map to 1; both set the flag.
struct EuclideanResult {
  Tensor matrix;  // N x N
  bool degenerate = false;
};
EuclideanResult euclidean_similarity(const Tensor& m);

// Cosine similarity affinely mapped from [-1,1] to [0,1]. Zero-norm rows
// cannot be scored and are excluded; `kept` lists the surviving row indices
// of the input, and the matrix is kept x kept.
struct CosineResult {
  Tensor matrix;
  std::vector<std::size_t> kept;
};
CosineResult cosine_similarity(const Tensor& m);

// Exact t-SNE with column standardization, perplexity-calibrated Gaussian
// kernels, early exaggeration, and momentum + adaptive gains. Deterministic
// per seed. Requires n > 3*perplexity and dims in {2,3}.
Tensor tsne_embed(const Tensor& m, int dims, double perplexity,
                  std::uint64_t seed, int max_iter = 500,
                  double learning_rate = 200.0);

// Per-task category counts and fractions over labeled samples. Categories
// with zero count still appear. The dominance flag fires when one category
// holds more than half of a task's labels.
struct TaskDistribution {
  std::size_t labeled = 0;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, double> fractions;
  std::string dominant;
  double dominant_fraction = 0.0;
  bool dominance_flag = false;
};
struct LabelDistribution {
  std::map<data::TaskKind, TaskDistribution> tasks;
};
LabelDistribution label_distribution(const data::Dataset& d);

struct SimilarityReport {
  std::vector<std::string> ids;  // analyzed samples, dataset order
  Tensor euclidean;              // N x N
  bool euclidean_degenerate = false;
  Tensor cosine;  // kept x kept
  std::vector<std::size_t> cosine_kept;
  Tensor embedding2;  // N x 2; empty when skipped
  Tensor embedding3;  // N x 3; empty when skipped
  bool tsne_skipped = false;
  std::string tsne_notice;
  std::vector<double> euclid_color;  // per analyzed sample
  std::vector<double> cosine_color;  // NaN for excluded rows
};

struct AnalysisReport {
  SimilarityReport sim;
  LabelDistribution labels;
  std::string config_hash;
};

// Full distribution study: equal-portion subsampling per source (seeded,
// capped), similarity matrices, per-point color scalars, 2-D/3-D t-SNE
// (skipped with a notice when n <= 3*perplexity), and the label audit over
// the complete dataset. When out_dir is non-empty the plot-data files are
// written there: matrix CSV + binary per metric, embedding CSVs, label
// distribution JSON, and a summary JSON.
AnalysisReport build_report(data::Dataset& d,
                            const preprocess::PipelineConfig& pipe,
                            const AnalysisConfig& cfg,
                            const std::string& out_dir = "",
                            const std::string& config_hash = "");

// Off-diagonal z-score alternative to the default min-max normalization;
// output is not range-bound. The diagonal is left untouched.
void zscore_offdiag(Tensor& matrix);

void write_matrix_csv(const std::string& path, const Tensor& m,
                      const std::vector<std::string>& ids);
void write_matrix_binary(const std::string& path, const Tensor& m);
void write_label_distribution_json(const std::string& path,
                                   const LabelDistribution& dist,
                                   const std::string& config_hash);

}  // namespace facekit::analysis
