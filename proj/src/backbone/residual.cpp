#include "facekit/backbone/residual.hpp"

#include <cmath>

#include "facekit/backbone/dense.hpp"
#include "facekit/core/error.hpp"
#include "facekit/core/rng.hpp"

namespace facekit::backbone {

namespace {

void he_init(Tensor& w, std::size_t fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.gaussian() * std;
}

}  // namespace

ResidualBackbone::ResidualBackbone(const BackboneSpec& spec) : spec_(spec) {
  spec_.validate();
  check(spec_.kind == "residual", "ResidualBackbone needs kind=residual");
  const std::size_t d = spec_.input_len();
  const std::size_t f = static_cast<std::size_t>(spec_.feature_dim);
  Rng rng(spec_.init_seed);

  params_.reserve(2 + 4 * static_cast<std::size_t>(spec_.num_blocks));
  params_.emplace_back("block1", "block1.w0",
                       std::vector<std::size_t>{f, d});
  params_.emplace_back("block1", "block1.b0", std::vector<std::size_t>{f});
  he_init(params_[0].value, d, rng);
  for (int k = 1; k <= spec_.num_blocks; ++k) {
    const std::string block = "block" + std::to_string(k);
    params_.emplace_back(block, block + ".w1", std::vector<std::size_t>{f, f});
    he_init(params_.back().value, f, rng);
    params_.emplace_back(block, block + ".b1", std::vector<std::size_t>{f});
    params_.emplace_back(block, block + ".w2", std::vector<std::size_t>{f, f});
    params_.emplace_back(block, block + ".b2", std::vector<std::size_t>{f});
  }
}

std::vector<std::string> ResidualBackbone::block_names() const {
  std::vector<std::string> names;
  for (int k = 1; k <= spec_.num_blocks; ++k)
    names.push_back("block" + std::to_string(k));
  return names;
}

std::vector<Param*> ResidualBackbone::params() {
  std::vector<Param*> out;
  for (Param& p : params_) out.push_back(&p);
  return out;
}

Param& ResidualBackbone::find(const std::string& name) {
  for (Param& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named " + name);
}

Tensor ResidualBackbone::forward(const Tensor& batch, bool grad_enabled) {
  const std::size_t d = spec_.input_len();
  if (batch.size() == 0 || batch.size() % d != 0)
    throw DataError("backbone input is not a multiple of 3HW");
  const std::size_t n = batch.size() / d;
  Tensor x = batch;
  x.reshape({n, d});

  cached_ = grad_enabled;
  if (grad_enabled) {
    in_ = x;
    block_in_.assign(static_cast<std::size_t>(spec_.num_blocks), Tensor());
    block_u_.assign(static_cast<std::size_t>(spec_.num_blocks), Tensor());
    block_r_.assign(static_cast<std::size_t>(spec_.num_blocks), Tensor());
  }

  Tensor h;
  dense_forward(x, find("block1.w0"), find("block1.b0"), h);
  if (grad_enabled) z0_ = h;
  relu_inplace(h);

  for (int k = 1; k <= spec_.num_blocks; ++k) {
    const std::string block = "block" + std::to_string(k);
    const std::size_t idx = static_cast<std::size_t>(k - 1);
    if (grad_enabled) block_in_[idx] = h;
    Tensor u;
    dense_forward(h, find(block + ".w1"), find(block + ".b1"), u);
    if (grad_enabled) block_u_[idx] = u;
    relu_inplace(u);
    if (grad_enabled) block_r_[idx] = u;
    Tensor f;
    dense_forward(u, find(block + ".w2"), find(block + ".b2"), f);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += f[i];
  }
  for (std::size_t i = 0; i < h.size(); ++i)
    if (!std::isfinite(h[i]))
      throw NumericError("non-finite value in backbone features");
  return h;
}

void ResidualBackbone::backward(const Tensor& d_features) {
  check(cached_, "backbone backward without a grad-enabled forward");
  Tensor dx = d_features;
  const std::size_t f = static_cast<std::size_t>(spec_.feature_dim);
  dx.reshape({dx.size() / f, f});

  for (int k = spec_.num_blocks; k >= 1; --k) {
    const std::string block = "block" + std::to_string(k);
    const std::size_t idx = static_cast<std::size_t>(k - 1);
    Tensor dr;
    dense_backward(block_r_[idx], dx, find(block + ".w2"),
                   find(block + ".b2"), &dr);
    relu_backward(block_u_[idx], dr);
    Tensor dxf;
    dense_backward(block_in_[idx], dr, find(block + ".w1"),
                   find(block + ".b1"), &dxf);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxf[i];
  }
  relu_backward(z0_, dx);
  dense_backward(in_, dx, find("block1.w0"), find("block1.b0"), nullptr);
  cached_ = false;
}

}  // namespace facekit::backbone
