#include "vamp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vamp/errors.hpp"

namespace vamp {

void ModelConfig::validate() const {
  if (embed_dim < 1 || layers < 1 || heads < 1) {
    throw ArgumentError("model config counts must be positive");
  }
  if (embed_dim % heads != 0) throw ArgumentError("embed_dim must be divisible by heads");
  if (n_levels < 1 || vocab < 2) throw ArgumentError("model needs n_levels >= 1 and vocab >= 2");
  if (max_timesteps < 1 || rel_window < 0) throw ArgumentError("bad sequence-length bounds");
  if (role == ModelRole::coarse_to_fine) {
    if (n_coarse < 1 || n_fine < 1 || n_coarse + n_fine != n_levels) {
      throw ArgumentError("coarse-to-fine needs n_coarse + n_fine == n_levels");
    }
  }
}

ParamLayout::ParamLayout(const ModelConfig& cfg) {
  cfg.validate();
  embed_dim_ = cfg.embed_dim;
  heads_ = cfg.heads;
  rel_window_ = cfg.rel_window;
  n_levels_ = cfg.n_levels;
  vocab_ = cfg.vocab;
  layers_ = cfg.layers;
  out_dim_ = cfg.predicted_levels() * cfg.vocab;

  const int64_t e = embed_dim_;
  const int64_t f = 4 * e;
  emb_table_ = int64_t(vocab_ + 1) * e;
  rel_table_ = int64_t(heads_) * (2 * rel_window_ + 1);
  per_layer_ = 2 * e            // ln1
               + 4 * (e * e + e)  // q, k, v, o
               + 2 * e            // ln2
               + (e * f + f)      // w1, b1
               + (f * e + e);     // w2, b2
  layers_base_ = n_levels_ * emb_table_ + rel_table_;
  tail_base_ = layers_base_ + layers_ * per_layer_;
  total = tail_base_ + 2 * e + e * out_dim_ + out_dim_;
}

int64_t ParamLayout::embedding(int32_t level) const { return level * emb_table_; }
int64_t ParamLayout::rel_bias() const { return n_levels_ * emb_table_; }

ParamLayout::Layer ParamLayout::layer(int32_t l) const {
  const int64_t e = embed_dim_;
  const int64_t f = 4 * e;
  int64_t at = layers_base_ + l * per_layer_;
  Layer out{};
  out.ln1_gain = at; at += e;
  out.ln1_bias = at; at += e;
  out.wq = at; at += e * e;
  out.bq = at; at += e;
  out.wk = at; at += e * e;
  out.bk = at; at += e;
  out.wv = at; at += e * e;
  out.bv = at; at += e;
  out.wo = at; at += e * e;
  out.bo = at; at += e;
  out.ln2_gain = at; at += e;
  out.ln2_bias = at; at += e;
  out.w1 = at; at += e * f;
  out.b1 = at; at += f;
  out.w2 = at; at += f * e;
  out.b2 = at; at += e;
  return out;
}

int64_t ParamLayout::final_ln_gain() const { return tail_base_; }
int64_t ParamLayout::final_ln_bias() const { return tail_base_ + embed_dim_; }
int64_t ParamLayout::head_w() const { return tail_base_ + 2 * embed_dim_; }
int64_t ParamLayout::head_b() const {
  return tail_base_ + 2 * embed_dim_ + int64_t(embed_dim_) * out_dim_;
}

namespace {

constexpr double kLnEps = 1e-5;

// C[M x N] += A[M x K] * B[K x N], all row-major.
template <typename T>
void mm_acc(T* c, const T* a, const T* b, int32_t m, int32_t k, int32_t n) {
  for (int32_t i = 0; i < m; ++i) {
    for (int32_t p = 0; p < k; ++p) {
      T aip = a[size_t(i) * k + p];
      const T* brow = b + size_t(p) * n;
      T* crow = c + size_t(i) * n;
      for (int32_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[M x K] += A[M x N] * B^T, with B stored [K x N]. B is transposed into a
// scratch buffer so the inner loop accumulates independent lanes (plain dot
// products are reductions the compiler will not vectorize here).
template <typename T>
void mm_abt(T* c, const T* a, const T* b, int32_t m, int32_t n, int32_t k) {
  std::vector<T> bt(size_t(n) * k);
  for (int32_t p = 0; p < k; ++p) {
    for (int32_t j = 0; j < n; ++j) bt[size_t(j) * k + p] = b[size_t(p) * n + j];
  }
  mm_acc(c, a, bt.data(), m, n, k);
}

// C[K x N] += A^T * B, with A stored [M x K], B stored [M x N].
template <typename T>
void mm_atb(T* c, const T* a, const T* b, int32_t m, int32_t k, int32_t n) {
  for (int32_t i = 0; i < m; ++i) {
    for (int32_t p = 0; p < k; ++p) {
      T aip = a[size_t(i) * k + p];
      const T* brow = b + size_t(i) * n;
      T* crow = c + size_t(p) * n;
      for (int32_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <typename T>
void add_bias(T* x, const T* b, int32_t rows, int32_t cols) {
  for (int32_t i = 0; i < rows; ++i) {
    T* row = x + size_t(i) * cols;
    for (int32_t j = 0; j < cols; ++j) row[j] += b[j];
  }
}

template <typename T>
struct LnStats {
  std::vector<T> mean, rstd;  // per row
};

template <typename T>
void layer_norm(T* out, LnStats<T>& stats, const T* x, const T* gain, const T* bias,
                int32_t rows, int32_t cols) {
  stats.mean.resize(size_t(rows));
  stats.rstd.resize(size_t(rows));
  for (int32_t i = 0; i < rows; ++i) {
    const T* row = x + size_t(i) * cols;
    T mu{};
    for (int32_t j = 0; j < cols; ++j) mu += row[j];
    mu /= T(cols);
    T var{};
    for (int32_t j = 0; j < cols; ++j) {
      T d = row[j] - mu;
      var += d * d;
    }
    var /= T(cols);
    T rstd = T(1) / std::sqrt(var + T(kLnEps));
    stats.mean[size_t(i)] = mu;
    stats.rstd[size_t(i)] = rstd;
    T* orow = out + size_t(i) * cols;
    for (int32_t j = 0; j < cols; ++j) orow[j] = (row[j] - mu) * rstd * gain[j] + bias[j];
  }
}

// Accumulates dx, dgain, dbias given upstream dy; x is the pre-norm input.
template <typename T>
void layer_norm_backward(T* dx, T* dgain, T* dbias, const T* dy, const T* x,
                         const T* gain, const LnStats<T>& stats, int32_t rows,
                         int32_t cols) {
  for (int32_t i = 0; i < rows; ++i) {
    const T* dyr = dy + size_t(i) * cols;
    const T* xr = x + size_t(i) * cols;
    T mu = stats.mean[size_t(i)];
    T rstd = stats.rstd[size_t(i)];
    T sum_dg{};
    T sum_dgx{};
    for (int32_t j = 0; j < cols; ++j) {
      T xhat = (xr[j] - mu) * rstd;
      T dyg = dyr[j] * gain[j];
      sum_dg += dyg;
      sum_dgx += dyg * xhat;
      dgain[j] += dyr[j] * xhat;
      dbias[j] += dyr[j];
    }
    T inv_n = T(1) / T(cols);
    T* dxr = dx + size_t(i) * cols;
    for (int32_t j = 0; j < cols; ++j) {
      T xhat = (xr[j] - mu) * rstd;
      T dyg = dyr[j] * gain[j];
      dxr[j] += rstd * (dyg - inv_n * sum_dg - xhat * inv_n * sum_dgx);
    }
  }
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / T(std::numbers::sqrt2)));
}

template <typename T>
T gelu_grad(T x) {
  T cdf = T(0.5) * (T(1) + std::erf(x / T(std::numbers::sqrt2)));
  T pdf = std::exp(T(-0.5) * x * x) / T(std::sqrt(2.0 * std::numbers::pi));
  return cdf + x * pdf;
}

inline int32_t rel_bucket(int32_t delta, int32_t window) {
  return std::clamp(delta, -window, window) + window;
}

template <typename T>
struct LayerCache {
  std::vector<T> x_in;        // [T][E] input to the block
  LnStats<T> ln1;
  std::vector<T> y1;          // [T][E]
  std::vector<T> q, k, v;     // [T][E]
  std::vector<T> probs;       // [H][T][T]
  std::vector<T> ctx;         // [T][E]
  std::vector<uint8_t> drop1;  // [T][E] kept flags, only when dropout active
  std::vector<T> x_mid;       // [T][E]
  LnStats<T> ln2;
  std::vector<T> y2;          // [T][E]
  std::vector<T> h1;          // [T][4E] pre-activation
  std::vector<T> act;         // [T][4E]
  std::vector<uint8_t> drop2;
};

template <typename T>
struct Cache {
  std::vector<T> x0;  // embedding sum
  std::vector<LayerCache<T>> layers;
  std::vector<T> x_final;  // input of the final norm
  LnStats<T> ln_f;
  std::vector<T> y_final;
};

void check_inputs(const ModelConfig& cfg, const TokenGrid& grid, const MaskGrid& mask) {
  cfg.validate();
  if (!mask.same_shape(grid)) throw ArgumentError("mask shape does not match grid");
  if (grid.levels != cfg.n_levels) throw ArgumentError("grid level count does not match model");
  if (grid.timesteps > cfg.max_timesteps) throw ArgumentError("sequence exceeds max_timesteps");
  if (int32_t(grid.vocab_sizes.size()) != cfg.n_levels) {
    throw ArgumentError("grid vocab list does not match model");
  }
  for (uint16_t c : grid.vocab_sizes) {
    if (int32_t(c) != cfg.vocab) throw ArgumentError("grid vocabulary does not match model");
  }
  if (cfg.role == ModelRole::coarse_to_fine) {
    for (int32_t t = 0; t < grid.timesteps; ++t) {
      for (int32_t n = 0; n < cfg.n_coarse; ++n) {
        if (mask.at(t, n)) throw ArgumentError("coarse levels must stay unmasked");
      }
    }
  }
}

// Elementwise dropout over a [rows x cols] activation; fills `kept` and scales
// survivors by 1/(1-rate).
template <typename T>
void apply_dropout(T* x, std::vector<uint8_t>& kept, int32_t rows, int32_t cols,
                   const DropoutSpec& dropout) {
  if (dropout.rate <= 0) return;
  if (dropout.rng == nullptr) throw ArgumentError("dropout rate > 0 requires an rng");
  kept.resize(size_t(rows) * cols);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  T scale = T(1.0 / (1.0 - dropout.rate));
  for (size_t i = 0; i < kept.size(); ++i) {
    kept[i] = u(*dropout.rng) >= dropout.rate ? 1 : 0;
    x[i] = kept[i] ? x[i] * scale : T(0);
  }
}

template <typename T>
void backprop_dropout(T* dx, const std::vector<uint8_t>& kept, double rate) {
  if (rate <= 0) return;
  T scale = T(1.0 / (1.0 - rate));
  for (size_t i = 0; i < kept.size(); ++i) dx[i] = kept[i] ? dx[i] * scale : T(0);
}

template <typename T>
LogitsT<T> forward_impl(const ModelConfig& cfg, std::span<const T> params,
                        const TokenGrid& grid, const MaskGrid& mask,
                        const DropoutSpec& dropout, Cache<T>* cache) {
  check_inputs(cfg, grid, mask);
  ParamLayout lay(cfg);
  if (int64_t(params.size()) != lay.total) {
    throw ArgumentError("parameter vector size does not match layout");
  }
  const int32_t t_len = grid.timesteps;
  const int32_t e = cfg.embed_dim;
  const int32_t f = cfg.ff_dim();
  const int32_t heads = cfg.heads;
  const int32_t dh = cfg.head_dim();
  const int32_t window = cfg.rel_window;
  const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));
  const T* p = params.data();

  Cache<T> local;
  Cache<T>& cc = cache ? *cache : local;
  cc.layers.resize(size_t(cfg.layers));

  // Sum of per-level embeddings; masked positions contribute the MASK row.
  std::vector<T> x(size_t(t_len) * e, T(0));
  for (int32_t t = 0; t < t_len; ++t) {
    T* row = x.data() + size_t(t) * e;
    for (int32_t n = 0; n < cfg.n_levels; ++n) {
      int32_t tok = mask.at(t, n) ? cfg.vocab : grid.at(t, n);
      const T* emb = p + lay.embedding(n) + int64_t(tok) * e;
      for (int32_t j = 0; j < e; ++j) row[j] += emb[j];
    }
  }
  cc.x0 = x;

  const T* rel = p + lay.rel_bias();
  std::vector<T> scores(size_t(t_len) * t_len);

  for (int32_t l = 0; l < cfg.layers; ++l) {
    auto off = lay.layer(l);
    LayerCache<T>& lc = cc.layers[size_t(l)];
    lc.x_in = x;

    lc.y1.assign(size_t(t_len) * e, T(0));
    layer_norm(lc.y1.data(), lc.ln1, x.data(), p + off.ln1_gain, p + off.ln1_bias,
               t_len, e);

    lc.q.assign(size_t(t_len) * e, T(0));
    lc.k.assign(size_t(t_len) * e, T(0));
    lc.v.assign(size_t(t_len) * e, T(0));
    mm_acc(lc.q.data(), lc.y1.data(), p + off.wq, t_len, e, e);
    add_bias(lc.q.data(), p + off.bq, t_len, e);
    mm_acc(lc.k.data(), lc.y1.data(), p + off.wk, t_len, e, e);
    add_bias(lc.k.data(), p + off.bk, t_len, e);
    mm_acc(lc.v.data(), lc.y1.data(), p + off.wv, t_len, e, e);
    add_bias(lc.v.data(), p + off.bv, t_len, e);

    lc.probs.assign(size_t(heads) * t_len * t_len, T(0));
    lc.ctx.assign(size_t(t_len) * e, T(0));
    for (int32_t h = 0; h < heads; ++h) {
      const T* bias_row = rel + int64_t(h) * (2 * window + 1);
      for (int32_t i = 0; i < t_len; ++i) {
        const T* qi = lc.q.data() + size_t(i) * e + size_t(h) * dh;
        T* srow = scores.data() + size_t(i) * t_len;
        for (int32_t j = 0; j < t_len; ++j) {
          const T* kj = lc.k.data() + size_t(j) * e + size_t(h) * dh;
          T dot{};
          for (int32_t d = 0; d < dh; ++d) dot += qi[d] * kj[d];
          srow[j] = dot * inv_sqrt_dh + bias_row[rel_bucket(i - j, window)];
        }
        // Softmax over keys.
        T mx = srow[0];
        for (int32_t j = 1; j < t_len; ++j) mx = std::max(mx, srow[j]);
        T sum{};
        for (int32_t j = 0; j < t_len; ++j) {
          srow[j] = std::exp(srow[j] - mx);
          sum += srow[j];
        }
        T inv = T(1) / sum;
        T* prow = lc.probs.data() + (size_t(h) * t_len + i) * t_len;
        for (int32_t j = 0; j < t_len; ++j) prow[j] = srow[j] * inv;
        // Mix values.
        T* crow = lc.ctx.data() + size_t(i) * e + size_t(h) * dh;
        for (int32_t j = 0; j < t_len; ++j) {
          const T* vj = lc.v.data() + size_t(j) * e + size_t(h) * dh;
          T pj = prow[j];
          for (int32_t d = 0; d < dh; ++d) crow[d] += pj * vj[d];
        }
      }
    }

    std::vector<T> attn(size_t(t_len) * e, T(0));
    mm_acc(attn.data(), lc.ctx.data(), p + off.wo, t_len, e, e);
    add_bias(attn.data(), p + off.bo, t_len, e);
    apply_dropout(attn.data(), lc.drop1, t_len, e, dropout);
    for (size_t i = 0; i < x.size(); ++i) x[i] += attn[i];
    lc.x_mid = x;

    lc.y2.assign(size_t(t_len) * e, T(0));
    layer_norm(lc.y2.data(), lc.ln2, x.data(), p + off.ln2_gain, p + off.ln2_bias,
               t_len, e);
    lc.h1.assign(size_t(t_len) * f, T(0));
    mm_acc(lc.h1.data(), lc.y2.data(), p + off.w1, t_len, e, f);
    add_bias(lc.h1.data(), p + off.b1, t_len, f);
    lc.act.resize(lc.h1.size());
    for (size_t i = 0; i < lc.h1.size(); ++i) lc.act[i] = gelu(lc.h1[i]);
    std::vector<T> ffn(size_t(t_len) * e, T(0));
    mm_acc(ffn.data(), lc.act.data(), p + off.w2, t_len, f, e);
    add_bias(ffn.data(), p + off.b2, t_len, e);
    apply_dropout(ffn.data(), lc.drop2, t_len, e, dropout);
    for (size_t i = 0; i < x.size(); ++i) x[i] += ffn[i];
  }

  cc.x_final = x;
  cc.y_final.assign(size_t(t_len) * e, T(0));
  layer_norm(cc.y_final.data(), cc.ln_f, x.data(), p + lay.final_ln_gain(),
             p + lay.final_ln_bias(), t_len, e);

  const int32_t out_dim = cfg.predicted_levels() * cfg.vocab;
  LogitsT<T> logits;
  logits.timesteps = t_len;
  logits.levels = cfg.predicted_levels();
  logits.vocab = cfg.vocab;
  logits.data.assign(size_t(t_len) * out_dim, T(0));
  mm_acc(logits.data.data(), cc.y_final.data(), p + lay.head_w(), t_len, e, out_dim);
  add_bias(logits.data.data(), p + lay.head_b(), t_len, out_dim);

  for (T v : logits.data) {
    if (!std::isfinite(double(v))) throw NumericError("non-finite logits");
  }
  return logits;
}

}  // namespace

template <typename T>
std::vector<T> init_parameters(const ModelConfig& cfg, uint64_t seed) {
  ParamLayout lay(cfg);
  std::vector<T> params(size_t(lay.total), T(0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto fill_normal = [&](int64_t at, int64_t count) {
    for (int64_t i = 0; i < count; ++i) params[size_t(at + i)] = T(normal(rng));
  };
  auto fill_ones = [&](int64_t at, int64_t count) {
    for (int64_t i = 0; i < count; ++i) params[size_t(at + i)] = T(1);
  };
  const int64_t e = cfg.embed_dim;
  const int64_t f = cfg.ff_dim();
  for (int32_t n = 0; n < cfg.n_levels; ++n) {
    fill_normal(lay.embedding(n), (cfg.vocab + 1) * e);
  }
  // Relative bias starts at zero (no positional preference).
  for (int32_t l = 0; l < cfg.layers; ++l) {
    auto off = lay.layer(l);
    fill_ones(off.ln1_gain, e);
    fill_normal(off.wq, e * e);
    fill_normal(off.wk, e * e);
    fill_normal(off.wv, e * e);
    fill_normal(off.wo, e * e);
    fill_ones(off.ln2_gain, e);
    fill_normal(off.w1, e * f);
    fill_normal(off.w2, f * e);
  }
  fill_ones(lay.final_ln_gain(), e);
  fill_normal(lay.head_w(), e * int64_t(cfg.predicted_levels()) * cfg.vocab);
  return params;
}

template <typename T>
LogitsT<T> forward(const ModelConfig& cfg, std::span<const T> params,
                   const TokenGrid& grid, const MaskGrid& mask,
                   const DropoutSpec& dropout) {
  return forward_impl<T>(cfg, params, grid, mask, dropout, nullptr);
}

template <typename T>
T masked_cross_entropy(const LogitsT<T>& logits, const TokenGrid& targets,
                       const MaskGrid& mask, Reduction reduction) {
  if (!mask.same_shape(targets)) throw ArgumentError("mask shape does not match targets");
  if (logits.timesteps != targets.timesteps || logits.levels > targets.levels) {
    throw ArgumentError("logits shape does not match targets");
  }
  const int32_t offset = targets.levels - logits.levels;
  T total{};
  int64_t count = 0;
  for (int32_t t = 0; t < targets.timesteps; ++t) {
    for (int32_t n = 0; n < targets.levels; ++n) {
      if (!mask.at(t, n)) continue;
      if (n < offset) throw ArgumentError("masked position outside predicted levels");
      const T* row = logits.data.data() + (size_t(t) * logits.levels + (n - offset)) * logits.vocab;
      int32_t target = targets.at(t, n);
      if (target >= logits.vocab) throw ArgumentError("target token outside logits vocabulary");
      T mx = row[0];
      for (int32_t c = 1; c < logits.vocab; ++c) mx = std::max(mx, row[c]);
      T sum{};
      for (int32_t c = 0; c < logits.vocab; ++c) sum += std::exp(row[c] - mx);
      total += std::log(sum) - (row[target] - mx);
      count += 1;
    }
  }
  if (count == 0) return T(0);
  return reduction == Reduction::mean ? total / T(count) : total;
}

template <typename T>
LossGrad<T> loss_and_grad(const ModelConfig& cfg, std::span<const T> params,
                          const TokenGrid& inputs, const MaskGrid& mask,
                          const TokenGrid& targets, const DropoutSpec& dropout) {
  if (targets.timesteps != inputs.timesteps || targets.levels != inputs.levels) {
    throw ArgumentError("targets shape does not match inputs");
  }
  Cache<T> cache;
  LogitsT<T> logits = forward_impl(cfg, params, inputs, mask, dropout, &cache);

  ParamLayout lay(cfg);
  LossGrad<T> out;
  out.grad.assign(size_t(lay.total), T(0));
  out.loss = masked_cross_entropy(logits, targets, mask, Reduction::mean);

  const int32_t t_len = inputs.timesteps;
  const int32_t e = cfg.embed_dim;
  const int32_t f = cfg.ff_dim();
  const int32_t heads = cfg.heads;
  const int32_t dh = cfg.head_dim();
  const int32_t window = cfg.rel_window;
  const int32_t out_dim = cfg.predicted_levels() * cfg.vocab;
  const int32_t offset = cfg.predicted_level_offset();
  const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));
  const T* p = params.data();
  T* g = out.grad.data();

  const int64_t n_masked = masked_count(mask);
  if (n_masked == 0) return out;  // constant loss
  const T scale = T(1) / T(n_masked);

  // d(loss)/d(logits): softmax minus one-hot at masked positions.
  std::vector<T> dlogits(size_t(t_len) * out_dim, T(0));
  for (int32_t t = 0; t < t_len; ++t) {
    for (int32_t n = 0; n < cfg.predicted_levels(); ++n) {
      if (!mask.at(t, offset + n)) continue;
      const T* row = logits.data.data() + (size_t(t) * logits.levels + n) * logits.vocab;
      T* drow = dlogits.data() + size_t(t) * out_dim + size_t(n) * cfg.vocab;
      T mx = row[0];
      for (int32_t c = 1; c < cfg.vocab; ++c) mx = std::max(mx, row[c]);
      T sum{};
      for (int32_t c = 0; c < cfg.vocab; ++c) sum += std::exp(row[c] - mx);
      T inv = T(1) / sum;
      for (int32_t c = 0; c < cfg.vocab; ++c) drow[c] = std::exp(row[c] - mx) * inv * scale;
      drow[targets.at(t, offset + n)] -= scale;
    }
  }

  // Head and final norm.
  std::vector<T> dy_final(size_t(t_len) * e, T(0));
  mm_atb(g + lay.head_w(), cache.y_final.data(), dlogits.data(), t_len, e, out_dim);
  for (int32_t t = 0; t < t_len; ++t) {
    const T* drow = dlogits.data() + size_t(t) * out_dim;
    for (int32_t j = 0; j < out_dim; ++j) g[lay.head_b() + j] += drow[j];
  }
  mm_abt(dy_final.data(), dlogits.data(), p + lay.head_w(), t_len, out_dim, e);

  std::vector<T> dx(size_t(t_len) * e, T(0));
  layer_norm_backward(dx.data(), g + lay.final_ln_gain(), g + lay.final_ln_bias(),
                      dy_final.data(), cache.x_final.data(), p + lay.final_ln_gain(),
                      cache.ln_f, t_len, e);

  std::vector<T> dy1(size_t(t_len) * e), dy2(size_t(t_len) * e);
  std::vector<T> dq(size_t(t_len) * e), dk(size_t(t_len) * e), dv(size_t(t_len) * e);
  std::vector<T> dctx(size_t(t_len) * e), dbranch(size_t(t_len) * e);
  std::vector<T> dh1(size_t(t_len) * f), dact(size_t(t_len) * f);
  std::vector<T> dscores(size_t(t_len) * t_len);

  for (int32_t l = cfg.layers - 1; l >= 0; --l) {
    auto off = lay.layer(l);
    const LayerCache<T>& lc = cache.layers[size_t(l)];

    // Feed-forward branch: x_out = x_mid + drop(W2 gelu(W1 ln2(x_mid))).
    std::copy(dx.begin(), dx.end(), dbranch.begin());
    backprop_dropout(dbranch.data(), lc.drop2, dropout.rate);
    std::fill(dact.begin(), dact.end(), T(0));
    mm_atb(g + off.w2, lc.act.data(), dbranch.data(), t_len, f, e);
    for (int32_t t = 0; t < t_len; ++t) {
      const T* row = dbranch.data() + size_t(t) * e;
      for (int32_t j = 0; j < e; ++j) g[off.b2 + j] += row[j];
    }
    mm_abt(dact.data(), dbranch.data(), p + off.w2, t_len, e, f);
    for (size_t i = 0; i < dh1.size(); ++i) dh1[i] = dact[i] * gelu_grad(lc.h1[i]);
    mm_atb(g + off.w1, lc.y2.data(), dh1.data(), t_len, e, f);
    for (int32_t t = 0; t < t_len; ++t) {
      const T* row = dh1.data() + size_t(t) * f;
      for (int32_t j = 0; j < f; ++j) g[off.b1 + j] += row[j];
    }
    std::fill(dy2.begin(), dy2.end(), T(0));
    mm_abt(dy2.data(), dh1.data(), p + off.w1, t_len, f, e);
    layer_norm_backward(dx.data(), g + off.ln2_gain, g + off.ln2_bias, dy2.data(),
                        lc.x_mid.data(), p + off.ln2_gain, lc.ln2, t_len, e);

    // Attention branch: x_mid = x_in + drop(Wo ctx + bo).
    std::copy(dx.begin(), dx.end(), dbranch.begin());
    backprop_dropout(dbranch.data(), lc.drop1, dropout.rate);
    std::fill(dctx.begin(), dctx.end(), T(0));
    mm_atb(g + off.wo, lc.ctx.data(), dbranch.data(), t_len, e, e);
    for (int32_t t = 0; t < t_len; ++t) {
      const T* row = dbranch.data() + size_t(t) * e;
      for (int32_t j = 0; j < e; ++j) g[off.bo + j] += row[j];
    }
    mm_abt(dctx.data(), dbranch.data(), p + off.wo, t_len, e, e);

    std::fill(dq.begin(), dq.end(), T(0));
    std::fill(dk.begin(), dk.end(), T(0));
    std::fill(dv.begin(), dv.end(), T(0));
    T* drel = g + lay.rel_bias();
    for (int32_t h = 0; h < heads; ++h) {
      T* drel_row = drel + int64_t(h) * (2 * window + 1);
      for (int32_t i = 0; i < t_len; ++i) {
        const T* prow = lc.probs.data() + (size_t(h) * t_len + i) * t_len;
        const T* dcrow = dctx.data() + size_t(i) * e + size_t(h) * dh;
        // dp and dv.
        T dot_p_dp{};
        T* dsrow = dscores.data() + size_t(i) * t_len;
        for (int32_t j = 0; j < t_len; ++j) {
          const T* vj = lc.v.data() + size_t(j) * e + size_t(h) * dh;
          T* dvj = dv.data() + size_t(j) * e + size_t(h) * dh;
          T dpij{};
          for (int32_t d = 0; d < dh; ++d) {
            dpij += dcrow[d] * vj[d];
            dvj[d] += prow[j] * dcrow[d];
          }
          dsrow[j] = dpij;
          dot_p_dp += prow[j] * dpij;
        }
        // Softmax backward and score fan-out.
        const T* qi = lc.q.data() + size_t(i) * e + size_t(h) * dh;
        T* dqi = dq.data() + size_t(i) * e + size_t(h) * dh;
        for (int32_t j = 0; j < t_len; ++j) {
          T ds = prow[j] * (dsrow[j] - dot_p_dp);
          drel_row[rel_bucket(i - j, window)] += ds;
          const T* kj = lc.k.data() + size_t(j) * e + size_t(h) * dh;
          T* dkj = dk.data() + size_t(j) * e + size_t(h) * dh;
          T dsc = ds * inv_sqrt_dh;
          for (int32_t d = 0; d < dh; ++d) {
            dqi[d] += dsc * kj[d];
            dkj[d] += dsc * qi[d];
          }
        }
      }
    }

    std::fill(dy1.begin(), dy1.end(), T(0));
    mm_atb(g + off.wq, lc.y1.data(), dq.data(), t_len, e, e);
    mm_atb(g + off.wk, lc.y1.data(), dk.data(), t_len, e, e);
    mm_atb(g + off.wv, lc.y1.data(), dv.data(), t_len, e, e);
    for (int32_t t = 0; t < t_len; ++t) {
      for (int32_t j = 0; j < e; ++j) {
        g[off.bq + j] += dq[size_t(t) * e + j];
        g[off.bk + j] += dk[size_t(t) * e + j];
        g[off.bv + j] += dv[size_t(t) * e + j];
      }
    }
    mm_abt(dy1.data(), dq.data(), p + off.wq, t_len, e, e);
    mm_abt(dy1.data(), dk.data(), p + off.wk, t_len, e, e);
    mm_abt(dy1.data(), dv.data(), p + off.wv, t_len, e, e);
    layer_norm_backward(dx.data(), g + off.ln1_gain, g + off.ln1_bias, dy1.data(),
                        lc.x_in.data(), p + off.ln1_gain, lc.ln1, t_len, e);
  }

  // Embedding rows.
  for (int32_t t = 0; t < t_len; ++t) {
    const T* drow = dx.data() + size_t(t) * e;
    for (int32_t n = 0; n < cfg.n_levels; ++n) {
      int32_t tok = mask.at(t, n) ? cfg.vocab : inputs.at(t, n);
      T* grow = g + lay.embedding(n) + int64_t(tok) * e;
      for (int32_t j = 0; j < e; ++j) grow[j] += drow[j];
    }
  }
  return out;
}

C2fView c2f_view(const ModelConfig& cfg, const TokenGrid& full_grid,
                 const MaskGrid& fine_mask) {
  cfg.validate();
  if (cfg.role != ModelRole::coarse_to_fine) {
    throw ArgumentError("c2f_view requires a coarse-to-fine config");
  }
  if (!fine_mask.same_shape(full_grid)) throw ArgumentError("mask shape does not match grid");
  if (full_grid.levels != cfg.n_levels) {
    throw ArgumentError("grid must carry the full level hierarchy");
  }
  for (int32_t t = 0; t < full_grid.timesteps; ++t) {
    for (int32_t n = 0; n < cfg.n_coarse; ++n) {
      if (fine_mask.at(t, n)) throw ArgumentError("coarse levels must stay unmasked");
    }
  }
  return C2fView{&full_grid, &fine_mask};
}

template std::vector<float> init_parameters<float>(const ModelConfig&, uint64_t);
template std::vector<double> init_parameters<double>(const ModelConfig&, uint64_t);
template LogitsT<float> forward<float>(const ModelConfig&, std::span<const float>,
                                       const TokenGrid&, const MaskGrid&,
                                       const DropoutSpec&);
template LogitsT<double> forward<double>(const ModelConfig&, std::span<const double>,
                                         const TokenGrid&, const MaskGrid&,
                                         const DropoutSpec&);
template float masked_cross_entropy<float>(const LogitsT<float>&, const TokenGrid&,
                                           const MaskGrid&, Reduction);
template double masked_cross_entropy<double>(const LogitsT<double>&, const TokenGrid&,
                                             const MaskGrid&, Reduction);
template LossGrad<float> loss_and_grad<float>(const ModelConfig&, std::span<const float>,
                                              const TokenGrid&, const MaskGrid&,
                                              const TokenGrid&, const DropoutSpec&);
template LossGrad<double> loss_and_grad<double>(const ModelConfig&,
                                                std::span<const double>, const TokenGrid&,
                                                const MaskGrid&, const TokenGrid&,
                                                const DropoutSpec&);

}  // namespace vamp
