#pragma once

#include <cstddef>

namespace facekit::kernels {

// Data-parallel numeric kernels. Every kernel is parallelized over output
// elements only: each output value is accumulated by exactly one thread in a
// fixed sequential order, so results are bitwise identical for any thread
// count and bitwise equal to the serial reference in kernels::serial. Tests
// compare the two implementations exactly; bench/ times them against each
// other.

// C (rows x cols) = A (rows x inner) * B (inner x cols), row-major.
void matmul(const double* a, const double* b, double* c, std::size_t rows,
            std::size_t inner, std::size_t cols);

// C (rows x cols) = A (rows x inner) * B^T, with B stored (cols x inner).
// This is the natural layout for dense layers whose weights are (out x in).
void matmul_nt(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols);

// C (inner x cols) = A^T * B, with A (rows x inner) and B (rows x cols).
// Used for weight gradients: dW = X^T * dY.
void matmul_tn(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols);

// out (n x n) = squared euclidean distances between rows of m (n x dim).
// Symmetric by construction, zero diagonal.
void pairwise_sqeuclidean(const double* m, double* out, std::size_t n,
                          std::size_t dim);

// out (n x n) = cosine of the angle between rows of m (n x dim), clamped to
// [-1, 1]; diagonal set to exactly 1. Rows must have nonzero norm.
void pairwise_cosine(const double* m, double* out, std::size_t n,
                     std::size_t dim);

// Bilinear resize of an interleaved H x W x 3 image (half-pixel centers,
// clamped borders). Resizing to the source size reproduces it bitwise.
void resize_bilinear(const double* src, std::size_t src_h, std::size_t src_w,
                     double* dst, std::size_t dst_h, std::size_t dst_w);

// Serial reference implementations with identical contracts. Kept for the
// equivalence tests and the benchmark; not used on hot paths.
namespace serial {
void matmul(const double* a, const double* b, double* c, std::size_t rows,
            std::size_t inner, std::size_t cols);
void matmul_nt(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols);
void matmul_tn(const double* a, const double* b, double* c, std::size_t rows,
               std::size_t inner, std::size_t cols);
void pairwise_sqeuclidean(const double* m, double* out, std::size_t n,
                          std::size_t dim);
void pairwise_cosine(const double* m, double* out, std::size_t n,
                     std::size_t dim);
void resize_bilinear(const double* src, std::size_t src_h, std::size_t src_w,
                     double* dst, std::size_t dst_h, std::size_t dst_w);
}  // namespace serial

}  // namespace facekit::kernels
