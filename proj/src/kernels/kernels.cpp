#include "facekit/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace facekit::kernels {

namespace {

// Shared element routines. Both the parallel and the serial variants call
// these, which is what makes the bitwise-equality contract hold trivially.

inline void matmul_row(const double* a, const double* b, double* c,
                       std::size_t inner, std::size_t cols) {
  std::memset(c, 0, cols * sizeof(double));
  for (std::size_t k = 0; k < inner; ++k) {
    const double av = a[k];
    const double* brow = b + k * cols;
    for (std::size_t j = 0; j < cols; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c,
                          std::size_t inner, std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    const double* brow = b + j * inner;
    double acc = 0.0;
    for (std::size_t k = 0; k < inner; ++k) acc += a[k] * brow[k];
    c[j] = acc;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c,
                          std::size_t rows, std::size_t inner,
                          std::size_t cols, std::size_t k) {
  std::memset(c, 0, cols * sizeof(double));
  for (std::size_t r = 0; r < rows; ++r) {
    const double av = a[r * inner + k];
    const double* brow = b + r * cols;
    for (std::size_t j = 0; j < cols; ++j) c[j] += av * brow[j];
  }
}

inline double sqdist(const double* x, const double* y, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = x[d] - y[d];
    acc += diff * diff;
  }
  return acc;
}

inline double dot(const double* x, const double* y, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) acc += x[d] * y[d];
  return acc;
}

inline void resize_row(const double* src, std::size_t src_h, std::size_t src_w,
                       double* dst, std::size_t dst_h, std::size_t dst_w,
                       std::size_t y) {
  const double scale_y =
      static_cast<double>(src_h) / static_cast<double>(dst_h);
  const double scale_x =
      static_cast<double>(src_w) / static_cast<double>(dst_w);
  // Sample coordinates are clamped before the floor so border samples
  // replicate the edge row/column instead of blending into the interior.
  const double sy =
      std::clamp((static_cast<double>(y) + 0.5) * scale_y - 0.5, 0.0,
                 static_cast<double>(src_h - 1));
  const double fy0 = std::floor(sy);
  const double wy = sy - fy0;
  const std::size_t y0 = static_cast<std::size_t>(fy0);
  const std::size_t y1 = std::min(y0 + 1, src_h - 1);
  double* out = dst + y * dst_w * 3;
  for (std::size_t x = 0; x < dst_w; ++x) {
    const double sx =
        std::clamp((static_cast<double>(x) + 0.5) * scale_x - 0.5, 0.0,
                   static_cast<double>(src_w - 1));
    const double fx0 = std::floor(sx);
    const double wx = sx - fx0;
    const std::size_t x0 = static_cast<std::size_t>(fx0);
    const std::size_t x1 = std::min(x0 + 1, src_w - 1);
    const double* p00 = src + (y0 * src_w + x0) * 3;
    const double* p01 = src + (y0 * src_w + x1) * 3;
    const double* p10 = src + (y1 * src_w + x0) * 3;
    const double* p11 = src + (y1 * src_w + x1) * 3;
    for (std::size_t c = 0; c < 3; ++c) {
      const double top = p00[c] * (1.0 - wx) + p01[c] * wx;
      const double bot = p10[c] * (1.0 - wx) + p11[c] * wx;
      out[x * 3 + c] = top * (1.0 - wy) + bot * wy;
    }
  }
}

}  // namespace

void matmul(const double* a, const double* b, double* c, std::size_t rows,
            std::size_t inner, std::size_t cols) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < rows; ++i)
    matmul_row(a + i * inner, b, c + i * cols, inner, cols);
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < rows; ++i)
    matmul_nt_row(a + i * inner, b, c + i * cols, inner, cols);
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols) {
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < inner; ++k)
    matmul_tn_row(a, b, c + k * cols, rows, inner, cols, k);
}

void pairwise_sqeuclidean(const double* m, double* out, std::size_t n,
                          std::size_t dim) {
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = sqdist(m + i * dim, m + j * dim, dim);
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  }
}

void pairwise_cosine(const double* m, double* out, std::size_t n,
                     std::size_t dim) {
  std::vector<double> norms(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i)
    norms[i] = std::sqrt(dot(m + i * dim, m + i * dim, dim));
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double cosv =
          dot(m + i * dim, m + j * dim, dim) / (norms[i] * norms[j]);
      const double clamped = std::clamp(cosv, -1.0, 1.0);
      out[i * n + j] = clamped;
      out[j * n + i] = clamped;
    }
  }
}

void resize_bilinear(const double* src, std::size_t src_h, std::size_t src_w,
                     double* dst, std::size_t dst_h, std::size_t dst_w) {
#pragma omp parallel for schedule(static)
  for (std::size_t y = 0; y < dst_h; ++y)
    resize_row(src, src_h, src_w, dst, dst_h, dst_w, y);
}

namespace serial {

void matmul(const double* a, const double* b, double* c, std::size_t rows,
            std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    matmul_row(a + i * inner, b, c + i * cols, inner, cols);
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    matmul_nt_row(a + i * inner, b, c + i * cols, inner, cols);
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols) {
  for (std::size_t k = 0; k < inner; ++k)
    matmul_tn_row(a, b, c + k * cols, rows, inner, cols, k);
}

void pairwise_sqeuclidean(const double* m, double* out, std::size_t n,
                          std::size_t dim) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = sqdist(m + i * dim, m + j * dim, dim);
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  }
}

void pairwise_cosine(const double* m, double* out, std::size_t n,
                     std::size_t dim) {
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i)
    norms[i] = std::sqrt(dot(m + i * dim, m + i * dim, dim));
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double cosv =
          dot(m + i * dim, m + j * dim, dim) / (norms[i] * norms[j]);
      const double clamped = std::clamp(cosv, -1.0, 1.0);
      out[i * n + j] = clamped;
      out[j * n + i] = clamped;
    }
  }
}

void resize_bilinear(const double* src, std::size_t src_h, std::size_t src_w,
                     double* dst, std::size_t dst_h, std::size_t dst_w) {
  for (std::size_t y = 0; y < dst_h; ++y)
    resize_row(src, src_h, src_w, dst, dst_h, dst_w, y);
}

}  // namespace serial

}  // namespace facekit::kernels
