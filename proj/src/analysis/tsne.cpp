#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "facekit/analysis/analysis.hpp"
#include "facekit/core/error.hpp"
#include "facekit/core/rng.hpp"
#include "facekit/kernels/kernels.hpp"

namespace facekit::analysis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kProbFloor = 1e-12;

// Zero mean, unit variance per column; constant columns become zero.
Tensor standardize_columns(const Tensor& m) {
  const std::size_t n = m.dim(0), d = m.dim(1);
  Tensor out({n, d});
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += m.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = m.at(i, j) - mean;
      var += dv * dv;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      out.at(i, j) = sd > 0.0 ? (m.at(i, j) - mean) / sd : 0.0;
  }
  return out;
}

// Per-row Gaussian bandwidths found by bisection so each conditional
// distribution hits the target perplexity; rows are then symmetrized into
// the joint p_ij.
std::vector<double> joint_probabilities(const Tensor& d2, double perplexity) {
  const std::size_t n = d2.dim(0);
  const double log_u = std::log(perplexity);
  std::vector<double> cond(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = -kInf, beta_hi = kInf;
    double sum = 0.0;
    for (int it = 0; it < 64; ++it) {
      sum = 0.0;
      double dsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          cond[i * n + j] = 0.0;
          continue;
        }
        const double e = std::exp(-beta * d2.at(i, j));
        cond[i * n + j] = e;
        sum += e;
        dsum += d2.at(i, j) * e;
      }
      if (sum <= 0.0) {
        // Bandwidth too sharp for these distances; widen it.
        beta_hi = beta;
        beta = beta_lo == -kInf ? beta / 2.0 : (beta + beta_lo) / 2.0;
        continue;
      }
      const double entropy = std::log(sum) + beta * dsum / sum;
      const double diff = entropy - log_u;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        beta_lo = beta;
        beta = beta_hi == kInf ? beta * 2.0 : (beta + beta_hi) / 2.0;
      } else {
        beta_hi = beta;
        beta = beta_lo == -kInf ? beta / 2.0 : (beta + beta_lo) / 2.0;
      }
    }
    if (sum > 0.0) {
      for (std::size_t j = 0; j < n; ++j) cond[i * n + j] /= sum;
    } else {
      // Degenerate row (e.g. all points coincide): fall back to uniform.
      for (std::size_t j = 0; j < n; ++j)
        cond[i * n + j] = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
    }
  }
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::max(
          (cond[i * n + j] + cond[j * n + i]) / (2.0 * static_cast<double>(n)),
          kProbFloor);
      p[i * n + j] = v;
      p[j * n + i] = v;
    }
  return p;
}

}  // namespace

Tensor tsne_embed(const Tensor& m, int dims, double perplexity,
                  std::uint64_t seed, int max_iter, double learning_rate) {
  const std::size_t n = m.dim(0);
  check(dims == 2 || dims == 3, "tsne_embed: dims must be 2 or 3");
  check(perplexity >= 1.0, "tsne_embed: perplexity must be at least 1");
  check(max_iter >= 1, "tsne_embed: max_iter must be positive");
  check(learning_rate > 0.0, "tsne_embed: learning_rate must be positive");
  if (!(static_cast<double>(n) > 3.0 * perplexity))
    throw ConfigError("tsne_embed: requires N > 3*perplexity (N=" +
                      std::to_string(n) +
                      ", perplexity=" + std::to_string(perplexity) + ")");

  const Tensor x = standardize_columns(m);
  Tensor d2({n, n});
  kernels::pairwise_sqeuclidean(x.data(), d2.data(), n, x.dim(1));
  std::vector<double> p = joint_probabilities(d2, perplexity);

  const int exag_end = std::max(1, max_iter / 4);
  const double exaggeration = 12.0;
  for (double& v : p) v *= exaggeration;

  const std::size_t kd = static_cast<std::size_t>(dims);
  Rng rng(seed);
  Tensor y({n, kd});
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.gaussian() * 1e-2;

  Tensor velocity({n, kd});
  Tensor gains({n, kd});
  gains.fill(1.0);
  Tensor ydist({n, n});
  std::vector<double> num(n * n, 0.0);
  std::vector<double> grad(n * kd, 0.0);

  for (int iter = 0; iter < max_iter; ++iter) {
    kernels::pairwise_sqeuclidean(y.data(), ydist.data(), n, kd);
    double qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double t = 1.0 / (1.0 + ydist.at(i, j));
        num[i * n + j] = t;
        num[j * n + i] = t;
        qsum += 2.0 * t;
      }

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double q = std::max(num[i * n + j] / qsum, kProbFloor);
        const double coef = 4.0 * (p[i * n + j] - q) * num[i * n + j];
        for (std::size_t k = 0; k < kd; ++k)
          grad[i * kd + k] += coef * (y.at(i, k) - y.at(j, k));
      }

    const double momentum = iter < exag_end ? 0.5 : 0.8;
    for (std::size_t i = 0; i < n * kd; ++i) {
      const bool same_dir = (grad[i] > 0.0) == (velocity[i] > 0.0);
      gains[i] = same_dir ? std::max(gains[i] * 0.8, 0.01) : gains[i] + 0.2;
      velocity[i] =
          momentum * velocity[i] - learning_rate * gains[i] * grad[i];
      y[i] += velocity[i];
    }
    for (std::size_t k = 0; k < kd; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y.at(i, k);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y.at(i, k) -= mean;
    }
    if (iter + 1 == exag_end)
      for (double& v : p) v /= exaggeration;
  }

  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i]))
      throw NumericError("tsne_embed: non-finite embedding coordinate");
  return y;
}

}  // namespace facekit::analysis
