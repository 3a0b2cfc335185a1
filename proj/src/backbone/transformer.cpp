#include "facekit/backbone/transformer.hpp"

#include <cmath>

#include "facekit/backbone/dense.hpp"
#include "facekit/core/error.hpp"
#include "facekit/core/rng.hpp"
#include "facekit/kernels/kernels.hpp"

namespace facekit::backbone {

namespace {

constexpr double kLnEps = 1e-5;

void gauss_init(Tensor& t, double std, Rng& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian() * std;
}

// Row-wise layer norm of x (S x E): out = normalized * g + b. Returns the
// normalized rows and the reciprocal stds needed by the backward pass.
void layer_norm(const Tensor& x, const Param& g, const Param& b, Tensor& out,
                Tensor& normalized, std::vector<double>& rstd) {
  const std::size_t s = x.dim(0);
  const std::size_t e = x.dim(1);
  out = Tensor({s, e});
  normalized = Tensor({s, e});
  rstd.assign(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    const double* row = x.data() + i * e;
    double mean = 0.0;
    for (std::size_t j = 0; j < e; ++j) mean += row[j];
    mean /= static_cast<double>(e);
    double var = 0.0;
    for (std::size_t j = 0; j < e; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(e);
    const double r = 1.0 / std::sqrt(var + kLnEps);
    rstd[i] = r;
    for (std::size_t j = 0; j < e; ++j) {
      const double n = (row[j] - mean) * r;
      normalized[i * e + j] = n;
      out[i * e + j] = n * g.value[j] + b.value[j];
    }
  }
}

// Backward of layer_norm: accumulates dg, db and writes dx.
void layer_norm_backward(const Tensor& dout, const Tensor& normalized,
                         const std::vector<double>& rstd, Param& g, Param& b,
                         Tensor& dx) {
  const std::size_t s = dout.dim(0);
  const std::size_t e = dout.dim(1);
  dx = Tensor({s, e});
  for (std::size_t i = 0; i < s; ++i) {
    const double* drow = dout.data() + i * e;
    const double* nrow = normalized.data() + i * e;
    double sum_dy = 0.0;
    double sum_dy_n = 0.0;
    for (std::size_t j = 0; j < e; ++j) {
      const double dy = drow[j] * g.value[j];
      sum_dy += dy;
      sum_dy_n += dy * nrow[j];
      g.grad[j] += drow[j] * nrow[j];
      b.grad[j] += drow[j];
    }
    const double inv_e = 1.0 / static_cast<double>(e);
    for (std::size_t j = 0; j < e; ++j) {
      const double dy = drow[j] * g.value[j];
      dx[i * e + j] =
          rstd[i] * (dy - sum_dy * inv_e - nrow[j] * sum_dy_n * inv_e);
    }
  }
}

// Row-wise softmax in place.
void softmax_rows(Tensor& m) {
  const std::size_t rows = m.dim(0);
  const std::size_t cols = m.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = m.data() + i * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
  }
}

// dS = (dP - rowsum(dP . P)) . P, in place over dP.
void softmax_backward_rows(const Tensor& p, Tensor& dp) {
  const std::size_t rows = p.dim(0);
  const std::size_t cols = p.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* prow = p.data() + i * cols;
    double* drow = dp.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += drow[j] * prow[j];
    for (std::size_t j = 0; j < cols; ++j)
      drow[j] = (drow[j] - acc) * prow[j];
  }
}

// Copies head h (columns h*dk..h*dk+dk) of m (S x E) into a S x dk tensor.
Tensor head_slice(const Tensor& m, std::size_t h, std::size_t dk) {
  const std::size_t s = m.dim(0);
  const std::size_t e = m.dim(1);
  Tensor out({s, dk});
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < dk; ++j)
      out[i * dk + j] = m[i * e + h * dk + j];
  return out;
}

void head_unslice_add(const Tensor& part, std::size_t h, std::size_t dk,
                      Tensor& m) {
  const std::size_t s = m.dim(0);
  const std::size_t e = m.dim(1);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < dk; ++j)
      m[i * e + h * dk + j] += part[i * dk + j];
}

}  // namespace

Tensor extract_patches(const Tensor& chw, int patch_size) {
  check(chw.rank() == 3 && chw.dim(0) == 3, "extract_patches needs 3 x H x W");
  const std::size_t h = chw.dim(1);
  const std::size_t w = chw.dim(2);
  const std::size_t p = static_cast<std::size_t>(patch_size);
  if (p == 0 || h % p != 0 || w % p != 0)
    throw DataError("image dims must be divisible by patch size");
  const std::size_t rows = h / p;
  const std::size_t cols = w / p;
  Tensor out({rows * cols, 3 * p * p});
  std::size_t idx = 0;
  for (std::size_t py = 0; py < rows; ++py) {
    for (std::size_t px = 0; px < cols; ++px) {
      double* dst = out.data() + idx * 3 * p * p;
      std::size_t o = 0;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x)
            dst[o++] = chw[(c * h + py * p + y) * w + px * p + x];
      ++idx;
    }
  }
  return out;
}

Tensor patchify(const Tensor& chw, int patch_size, const Param& w,
                const Param& b) {
  const Tensor patches = extract_patches(chw, patch_size);
  Tensor out;
  dense_forward(patches, w, b, out);
  return out;
}

TransformerBackbone::TransformerBackbone(const BackboneSpec& spec)
    : spec_(spec) {
  spec_.validate();
  check(spec_.kind == "transformer",
        "TransformerBackbone needs kind=transformer");
  const std::size_t e = static_cast<std::size_t>(spec_.feature_dim);
  const std::size_t p = static_cast<std::size_t>(spec_.patch_size);
  const std::size_t patch_len = 3 * p * p;
  const std::size_t s = tokens();
  const std::size_t m = static_cast<std::size_t>(spec_.mlp_hidden);
  Rng rng(spec_.init_seed);

  auto add = [&](const std::string& block, const std::string& name,
                 std::vector<std::size_t> shape) -> Param& {
    params_.emplace_back(block, name, std::move(shape));
    return params_.back();
  };
  params_.reserve(5 + 16 * static_cast<std::size_t>(spec_.num_blocks));

  gauss_init(add("embed", "embed.w", {e, patch_len}).value,
             std::sqrt(2.0 / static_cast<double>(patch_len)), rng);
  add("embed", "embed.b", {e});
  gauss_init(add("embed", "embed.pos", {s, e}).value, 0.02, rng);
  if (spec_.cls_token)
    gauss_init(add("embed", "embed.cls", {e}).value, 0.02, rng);

  const double we = std::sqrt(2.0 / static_cast<double>(e));
  for (int l = 1; l <= spec_.num_blocks; ++l) {
    const std::string blk = "layer" + std::to_string(l);
    auto addw = [&](const std::string& n, std::vector<std::size_t> shape,
                    double std) {
      gauss_init(add(blk, blk + "." + n, std::move(shape)).value, std, rng);
    };
    add(blk, blk + ".ln1.g", {e}).value.fill(1.0);
    add(blk, blk + ".ln1.b", {e});
    addw("wq", {e, e}, we);
    add(blk, blk + ".bq", {e});
    addw("wk", {e, e}, we);
    add(blk, blk + ".bk", {e});
    addw("wv", {e, e}, we);
    add(blk, blk + ".bv", {e});
    addw("wo", {e, e}, we);
    add(blk, blk + ".bo", {e});
    add(blk, blk + ".ln2.g", {e}).value.fill(1.0);
    add(blk, blk + ".ln2.b", {e});
    addw("w1", {m, e}, we);
    add(blk, blk + ".b1", {m});
    addw("w2", {e, m}, std::sqrt(2.0 / static_cast<double>(m)));
    add(blk, blk + ".b2", {e});
  }
}

std::size_t TransformerBackbone::tokens() const {
  const std::size_t p = static_cast<std::size_t>(spec_.patch_size);
  const std::size_t n_patches = (static_cast<std::size_t>(spec_.input_h) / p) *
                                (static_cast<std::size_t>(spec_.input_w) / p);
  return n_patches + (spec_.cls_token ? 1 : 0);
}

std::vector<std::string> TransformerBackbone::block_names() const {
  std::vector<std::string> names{"embed"};
  for (int l = 1; l <= spec_.num_blocks; ++l)
    names.push_back("layer" + std::to_string(l));
  return names;
}

std::vector<Param*> TransformerBackbone::params() {
  std::vector<Param*> out;
  for (Param& p : params_) out.push_back(&p);
  return out;
}

Param& TransformerBackbone::find(const std::string& name) {
  for (Param& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named " + name);
}

Tensor TransformerBackbone::forward(const Tensor& batch, bool grad_enabled) {
  const std::size_t d = spec_.input_len();
  if (batch.size() == 0 || batch.size() % d != 0)
    throw DataError("backbone input is not a multiple of 3HW");
  const std::size_t n = batch.size() / d;
  const std::size_t e = static_cast<std::size_t>(spec_.feature_dim);
  const std::size_t s = tokens();
  const std::size_t heads = static_cast<std::size_t>(spec_.num_heads);
  const std::size_t dk = e / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  cached_ = grad_enabled;
  cache_.clear();
  if (grad_enabled) cache_.resize(n);

  Tensor features({n, e});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor chw({3, static_cast<std::size_t>(spec_.input_h),
                static_cast<std::size_t>(spec_.input_w)});
    std::copy(batch.data() + i * d, batch.data() + (i + 1) * d, chw.data());
    Tensor patches = extract_patches(chw, spec_.patch_size);

    Tensor x;
    dense_forward(patches, find("embed.w"), find("embed.b"), x);
    if (spec_.cls_token) {
      Tensor with_cls({s, e});
      const Param& cls = find("embed.cls");
      for (std::size_t j = 0; j < e; ++j) with_cls[j] = cls.value[j];
      std::copy(x.data(), x.data() + x.size(), with_cls.data() + e);
      x = std::move(with_cls);
    }
    const Param& pos = find("embed.pos");
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += pos.value[j];

    if (grad_enabled) {
      cache_[i].patches = patches;
      cache_[i].layers.resize(static_cast<std::size_t>(spec_.num_blocks));
    }

    for (int l = 1; l <= spec_.num_blocks; ++l) {
      const std::string blk = "layer" + std::to_string(l);
      LayerCache* lc =
          grad_enabled ? &cache_[i].layers[static_cast<std::size_t>(l - 1)]
                       : nullptr;
      if (lc) lc->x_in = x;

      Tensor normed, normalized;
      std::vector<double> rstd;
      layer_norm(x, find(blk + ".ln1.g"), find(blk + ".ln1.b"), normed,
                 normalized, rstd);
      if (lc) {
        lc->ln1.out = normed;
        lc->ln1.normalized = normalized;
        lc->ln1.rstd = rstd;
      }

      Tensor q, k, v;
      dense_forward(normed, find(blk + ".wq"), find(blk + ".bq"), q);
      dense_forward(normed, find(blk + ".wk"), find(blk + ".bk"), k);
      dense_forward(normed, find(blk + ".wv"), find(blk + ".bv"), v);
      if (lc) {
        lc->q = q;
        lc->k = k;
        lc->v = v;
        lc->attn.resize(heads);
      }

      Tensor concat({s, e});
      for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = head_slice(q, h, dk);
        Tensor kh = head_slice(k, h, dk);
        Tensor vh = head_slice(v, h, dk);
        Tensor scores({s, s});
        kernels::serial::matmul_nt(qh.data(), kh.data(), scores.data(), s, dk,
                                   s);
        for (std::size_t j = 0; j < scores.size(); ++j) scores[j] *= scale;
        softmax_rows(scores);
        if (lc) lc->attn[h] = scores;
        Tensor oh({s, dk});
        kernels::serial::matmul(scores.data(), vh.data(), oh.data(), s, s,
                                dk);
        head_unslice_add(oh, h, dk, concat);
      }
      if (lc) lc->attn_concat = concat;

      Tensor attn_out;
      dense_forward(concat, find(blk + ".wo"), find(blk + ".bo"), attn_out);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += attn_out[j];
      if (lc) lc->x_mid = x;

      layer_norm(x, find(blk + ".ln2.g"), find(blk + ".ln2.b"), normed,
                 normalized, rstd);
      if (lc) {
        lc->ln2.out = normed;
        lc->ln2.normalized = normalized;
        lc->ln2.rstd = rstd;
      }
      Tensor u;
      dense_forward(normed, find(blk + ".w1"), find(blk + ".b1"), u);
      if (lc) lc->mlp_pre = u;
      relu_inplace(u);
      if (lc) lc->mlp_act = u;
      Tensor f;
      dense_forward(u, find(blk + ".w2"), find(blk + ".b2"), f);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += f[j];
    }

    double* out_row = features.data() + i * e;
    if (spec_.cls_token) {
      for (std::size_t j = 0; j < e; ++j) out_row[j] = x[j];
    } else {
      for (std::size_t j = 0; j < e; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < s; ++t) acc += x[t * e + j];
        out_row[j] = acc / static_cast<double>(s);
      }
    }
  }
  for (std::size_t j = 0; j < features.size(); ++j)
    if (!std::isfinite(features[j]))
      throw NumericError("non-finite value in backbone features");
  return features;
}

void TransformerBackbone::backward(const Tensor& d_features) {
  check(cached_, "backbone backward without a grad-enabled forward");
  const std::size_t n = cache_.size();
  const std::size_t e = static_cast<std::size_t>(spec_.feature_dim);
  const std::size_t s = tokens();
  const std::size_t heads = static_cast<std::size_t>(spec_.num_heads);
  const std::size_t dk = e / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  for (std::size_t i = 0; i < n; ++i) {
    Tensor dx({s, e});
    const double* drow = d_features.data() + i * e;
    if (spec_.cls_token) {
      for (std::size_t j = 0; j < e; ++j) dx[j] = drow[j];
    } else {
      for (std::size_t t = 0; t < s; ++t)
        for (std::size_t j = 0; j < e; ++j)
          dx[t * e + j] = drow[j] / static_cast<double>(s);
    }

    for (int l = spec_.num_blocks; l >= 1; --l) {
      const std::string blk = "layer" + std::to_string(l);
      LayerCache& lc = cache_[i].layers[static_cast<std::size_t>(l - 1)];

      // MLP residual branch.
      Tensor du;
      dense_backward(lc.mlp_act, dx, find(blk + ".w2"), find(blk + ".b2"),
                     &du);
      relu_backward(lc.mlp_pre, du);
      Tensor dnormed;
      dense_backward(lc.ln2.out, du, find(blk + ".w1"), find(blk + ".b1"),
                     &dnormed);
      Tensor dmid;
      layer_norm_backward(dnormed, lc.ln2.normalized, lc.ln2.rstd,
                          find(blk + ".ln2.g"), find(blk + ".ln2.b"), dmid);
      for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dmid[j];

      // Attention residual branch.
      Tensor dconcat;
      dense_backward(lc.attn_concat, dx, find(blk + ".wo"), find(blk + ".bo"),
                     &dconcat);
      Tensor dq({s, e}), dkk({s, e}), dv({s, e});
      for (std::size_t h = 0; h < heads; ++h) {
        Tensor doh = head_slice(dconcat, h, dk);
        Tensor vh = head_slice(lc.v, h, dk);
        Tensor qh = head_slice(lc.q, h, dk);
        Tensor kh = head_slice(lc.k, h, dk);
        const Tensor& p = lc.attn[h];

        Tensor dp({s, s});
        kernels::serial::matmul_nt(doh.data(), vh.data(), dp.data(), s, dk,
                                   s);
        Tensor dvh({s, dk});
        kernels::serial::matmul_tn(p.data(), doh.data(), dvh.data(), s, s,
                                   dk);
        softmax_backward_rows(p, dp);
        for (std::size_t j = 0; j < dp.size(); ++j) dp[j] *= scale;
        Tensor dqh({s, dk});
        kernels::serial::matmul(dp.data(), kh.data(), dqh.data(), s, s, dk);
        Tensor dkh({s, dk});
        kernels::serial::matmul_tn(dp.data(), qh.data(), dkh.data(), s, s,
                                   dk);
        head_unslice_add(dqh, h, dk, dq);
        head_unslice_add(dkh, h, dk, dkk);
        head_unslice_add(dvh, h, dk, dv);
      }
      Tensor dn1({s, e}), tmp;
      dense_backward(lc.ln1.out, dq, find(blk + ".wq"), find(blk + ".bq"),
                     &tmp);
      for (std::size_t j = 0; j < dn1.size(); ++j) dn1[j] += tmp[j];
      dense_backward(lc.ln1.out, dkk, find(blk + ".wk"), find(blk + ".bk"),
                     &tmp);
      for (std::size_t j = 0; j < dn1.size(); ++j) dn1[j] += tmp[j];
      dense_backward(lc.ln1.out, dv, find(blk + ".wv"), find(blk + ".bv"),
                     &tmp);
      for (std::size_t j = 0; j < dn1.size(); ++j) dn1[j] += tmp[j];
      Tensor dxin;
      layer_norm_backward(dn1, lc.ln1.normalized, lc.ln1.rstd,
                          find(blk + ".ln1.g"), find(blk + ".ln1.b"), dxin);
      for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dxin[j];
    }

    // Embedding stage.
    Param& pos = find("embed.pos");
    for (std::size_t j = 0; j < dx.size(); ++j) pos.grad[j] += dx[j];
    Tensor dpatch_embed;
    if (spec_.cls_token) {
      Param& cls = find("embed.cls");
      for (std::size_t j = 0; j < e; ++j) cls.grad[j] += dx[j];
      dpatch_embed = Tensor({s - 1, e});
      std::copy(dx.data() + e, dx.data() + dx.size(), dpatch_embed.data());
    } else {
      dpatch_embed = dx;
    }
    dense_backward(cache_[i].patches, dpatch_embed, find("embed.w"),
                   find("embed.b"), nullptr);
  }
  cached_ = false;
}

}  // namespace facekit::backbone
