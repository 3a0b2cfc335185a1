#pragma once

#include "facekit/backbone/params.hpp"
#include "facekit/core/tensor.hpp"

namespace facekit::backbone {

// y (N x out) = x (N x in) * w^T + b, with w stored (out x in).
void dense_forward(const Tensor& x, const Param& w, const Param& b, Tensor& y);

// Accumulates dw += dy^T * x and db += column sums of dy; writes
// dx = dy * w when dx is non-null (overwriting it).
void dense_backward(const Tensor& x, const Tensor& dy, Param& w, Param& b,
                    Tensor* dx);

// In-place ReLU; returns its argument for chaining.
Tensor& relu_inplace(Tensor& t);

// dz = dy masked by relu activity of z (z is the pre-activation).
void relu_backward(const Tensor& z, Tensor& dy);

}  // namespace facekit::backbone
