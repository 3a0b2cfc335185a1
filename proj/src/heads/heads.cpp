#include "facekit/heads/heads.hpp"

#include <cmath>

#include "facekit/backbone/dense.hpp"
#include "facekit/core/error.hpp"

namespace facekit::heads {

void HeadSpec::validate() const {
  check(num_classes >= 1, "head needs at least one class");
  check(dropout_rate >= 0.0 && dropout_rate < 1.0,
        "dropout_rate must lie in [0, 1)");
  for (int h : hidden_sizes) check(h >= 1, "hidden sizes must be positive");
}

std::vector<HeadSpec> make_head_specs(const data::LabelSchema& schema,
                                      const HeadConfig& cfg) {
  std::vector<HeadSpec> specs;
  for (data::TaskKind t : data::kAllTasks) {
    if (!schema.has_task(t)) continue;
    const auto& space = schema.space(t);
    check(!space.numeric, "model heads need categorical label spaces; task '" +
                              data::task_name(t) + "' is numeric");
    HeadSpec spec;
    spec.task = t;
    spec.hidden_sizes = cfg.hidden_sizes;
    spec.dropout_rate = cfg.dropout_rate;
    spec.num_classes = static_cast<int>(space.num_classes());
    specs.push_back(std::move(spec));
  }
  return specs;
}

Head::Head(const HeadSpec& spec, std::size_t feature_dim, Rng& init_rng)
    : spec_(spec) {
  spec_.validate();
  const std::string block = "head." + data::task_name(spec_.task);
  std::vector<std::size_t> widths;
  widths.push_back(feature_dim);
  for (int h : spec_.hidden_sizes)
    widths.push_back(static_cast<std::size_t>(h));
  widths.push_back(static_cast<std::size_t>(spec_.num_classes));

  params_.reserve(2 * (widths.size() - 1));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string idx = std::to_string(l + 1);
    params_.emplace_back(block, block + ".w" + idx,
                         std::vector<std::size_t>{widths[l + 1], widths[l]});
    const double std = std::sqrt(2.0 / static_cast<double>(widths[l]));
    Tensor& w = params_.back().value;
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = init_rng.gaussian() * std;
    params_.emplace_back(block, block + ".b" + idx,
                         std::vector<std::size_t>{widths[l + 1]});
  }
}

std::vector<backbone::Param*> Head::params() {
  std::vector<backbone::Param*> out;
  for (backbone::Param& p : params_) out.push_back(&p);
  return out;
}

Tensor Head::forward(const Tensor& features, bool training, Rng* rng,
                     bool grad_enabled) {
  if (training && spec_.dropout_rate > 0.0)
    check(rng != nullptr, "training-mode head forward needs a dropout rng");
  const std::size_t n_hidden = spec_.hidden_sizes.size();
  cached_ = grad_enabled;
  inputs_.clear();
  preact_.clear();
  dropmask_.clear();

  Tensor x = features;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    if (grad_enabled) inputs_.push_back(x);
    Tensor z;
    dense_forward(x, params_[2 * l], params_[2 * l + 1], z);
    if (grad_enabled) preact_.push_back(z);
    backbone::relu_inplace(z);
    if (training && spec_.dropout_rate > 0.0) {
      const double keep = 1.0 - spec_.dropout_rate;
      Tensor mask({z.dim(0), z.dim(1)});
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double m = rng->uniform() < keep ? 1.0 / keep : 0.0;
        mask[i] = m;
        z[i] *= m;
      }
      if (grad_enabled) dropmask_.push_back(std::move(mask));
    }
    x = std::move(z);
  }
  if (grad_enabled) inputs_.push_back(x);
  Tensor logits;
  dense_forward(x, params_[2 * n_hidden], params_[2 * n_hidden + 1], logits);
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (!std::isfinite(logits[i]))
      throw NumericError("non-finite logit in head " +
                         data::task_name(spec_.task));
  return logits;
}

Tensor Head::backward(const Tensor& dlogits) {
  check(cached_, "head backward without a grad-enabled forward");
  const std::size_t n_hidden = spec_.hidden_sizes.size();
  Tensor d = dlogits;
  for (std::size_t l = n_hidden + 1; l-- > 0;) {
    Tensor dx;
    dense_backward(inputs_[l], d, params_[2 * l], params_[2 * l + 1], &dx);
    if (l == 0) {
      cached_ = false;
      return dx;
    }
    if (!dropmask_.empty()) {
      const Tensor& mask = dropmask_[l - 1];
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
    }
    backbone::relu_backward(preact_[l - 1], dx);
    d = std::move(dx);
  }
  throw NumericError("unreachable");
}

std::vector<int> predict(const Tensor& logits) {
  const std::size_t n = logits.dim(0);
  const std::size_t c = logits.dim(1);
  check(c >= 1, "predict needs at least one class column");
  std::vector<int> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data() + i * c;
    int best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    out[i] = best;
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t n = out.dim(0);
  const std::size_t c = out.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= sum;
  }
  return out;
}

}  // namespace facekit::heads
