#include <algorithm>
#include <cmath>

#include "facekit/analysis/analysis.hpp"
#include "facekit/core/error.hpp"
#include "facekit/kernels/kernels.hpp"

namespace facekit::analysis {

void AnalysisConfig::validate() const {
  check(perplexity >= 1.0, "AnalysisConfig: perplexity must be at least 1");
  check(subsample_cap >= 2, "AnalysisConfig: subsample_cap must be at least 2");
  check(color_reduction == "row_mean" || color_reduction == "row_median",
        "AnalysisConfig: unknown color_reduction '" + color_reduction + "'");
  check(normalization == "minmax" || normalization == "zscore",
        "AnalysisConfig: unknown normalization '" + normalization + "'");
  check(tsne_max_iter >= 1, "AnalysisConfig: tsne_max_iter must be positive");
  check(tsne_learning_rate > 0.0,
        "AnalysisConfig: tsne_learning_rate must be positive");
}

Tensor flatten_images(data::Dataset& d,
                      const preprocess::PipelineConfig& pipe) {
  Tensor m = preprocess::preprocess_dataset(d, pipe);
  const std::size_t n = d.samples.size();
  const std::size_t dim = 3u * static_cast<std::size_t>(pipe.target_h) *
                          static_cast<std::size_t>(pipe.target_w);
  m.reshape({n, dim});
  return m;
}

EuclideanResult euclidean_similarity(const Tensor& m) {
  const std::size_t n = m.dim(0);
  check(n >= 2, "euclidean_similarity: need at least 2 rows");
  EuclideanResult out;
  out.matrix = Tensor({n, n});
  kernels::pairwise_sqeuclidean(m.data(), out.matrix.data(), n, m.dim(1));
  for (std::size_t i = 0; i < n * n; ++i)
    out.matrix[i] = std::sqrt(out.matrix[i]);

  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = out.matrix.at(i, j);
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  if (hi > lo) {
    const double span = hi - lo;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) out.matrix.at(i, j) = (out.matrix.at(i, j) - lo) / span;
  } else {
    // Every off-diagonal distance is equal: nothing to spread.
    const double v = hi == 0.0 ? 0.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) out.matrix.at(i, j) = v;
    out.degenerate = true;
  }
  return out;
}

CosineResult cosine_similarity(const Tensor& m) {
  const std::size_t n = m.dim(0);
  const std::size_t dim = m.dim(1);
  check(n >= 2, "cosine_similarity: need at least 2 rows");
  CosineResult out;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = m.at(i, j);
      sq += v * v;
    }
    if (sq > 0.0) out.kept.push_back(i);
  }
  const std::size_t k = out.kept.size();
  if (k == 0) {
    out.matrix = Tensor({0, 0});
    return out;
  }
  Tensor sub({k, dim});
  for (std::size_t r = 0; r < k; ++r)
    std::copy_n(m.data() + out.kept[r] * dim, dim, sub.data() + r * dim);
  out.matrix = Tensor({k, k});
  kernels::pairwise_cosine(sub.data(), out.matrix.data(), k, dim);
  for (std::size_t i = 0; i < k * k; ++i)
    out.matrix[i] = (out.matrix[i] + 1.0) / 2.0;
  return out;
}

LabelDistribution label_distribution(const data::Dataset& d) {
  LabelDistribution out;
  for (const auto& [task, space] : d.schema.tasks) {
    TaskDistribution td;
    for (const std::string& c : space.categories) td.counts[c] = 0;
    for (const data::Sample& s : d.samples) {
      const auto it = s.labels.find(task);
      if (it == s.labels.end()) continue;
      ++td.counts[it->second];
      ++td.labeled;
    }
    if (td.labeled > 0) {
      for (const auto& [cat, c] : td.counts) {
        const double f =
            static_cast<double>(c) / static_cast<double>(td.labeled);
        td.fractions[cat] = f;
        if (f > td.dominant_fraction) {
          td.dominant_fraction = f;
          td.dominant = cat;
        }
      }
      td.dominance_flag = td.dominant_fraction > 0.5;
    }
    out.tasks[task] = std::move(td);
  }
  return out;
}

void zscore_offdiag(Tensor& matrix) {
  const std::size_t n = matrix.dim(0);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        sum += matrix.at(i, j);
        ++count;
      }
  if (count == 0) return;
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const double dv = matrix.at(i, j) - mean;
        var += dv * dv;
      }
  const double sd = std::sqrt(var / static_cast<double>(count));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j)
        matrix.at(i, j) = sd > 0.0 ? (matrix.at(i, j) - mean) / sd : 0.0;
}

}  // namespace facekit::analysis
