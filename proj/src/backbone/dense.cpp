#include "facekit/backbone/dense.hpp"

#include "facekit/core/error.hpp"
#include "facekit/kernels/kernels.hpp"

namespace facekit::backbone {

void dense_forward(const Tensor& x, const Param& w, const Param& b,
                   Tensor& y) {
  const std::size_t n = x.dim(0);
  const std::size_t in = w.value.dim(1);
  const std::size_t out = w.value.dim(0);
  if (x.size() != n * in)
    throw DataError("dense_forward: input width mismatch for " + w.name);
  y = Tensor({n, out});
  kernels::matmul_nt(x.data(), w.value.data(), y.data(), n, in, out);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = y.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) row[j] += b.value[j];
  }
}

void dense_backward(const Tensor& x, const Tensor& dy, Param& w, Param& b,
                    Tensor* dx) {
  const std::size_t n = x.dim(0);
  const std::size_t in = w.value.dim(1);
  const std::size_t out = w.value.dim(0);
  Tensor dw({out, in});
  kernels::matmul_tn(dy.data(), x.data(), dw.data(), n, out, in);
  for (std::size_t i = 0; i < dw.size(); ++i) w.grad[i] += dw[i];
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = dy.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) b.grad[j] += row[j];
  }
  if (dx != nullptr) {
    *dx = Tensor({n, in});
    kernels::matmul(dy.data(), w.value.data(), dx->data(), n, out, in);
  }
}

Tensor& relu_inplace(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] < 0.0) t[i] = 0.0;
  return t;
}

void relu_backward(const Tensor& z, Tensor& dy) {
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] <= 0.0) dy[i] = 0.0;
}

}  // namespace facekit::backbone
