#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vamp/tokens.hpp"

namespace vamp {

enum class ModelRole : uint8_t { coarse = 0, coarse_to_fine = 1 };
enum class Reduction { sum, mean };

// Bidirectional transformer over token grids. Per-level token embeddings are
// summed into one vector per timestep (one extra row per level, index C, is
// the MASK symbol). Pre-norm residual blocks, GELU feed-forward of width 4E,
// learned per-head relative position bias clipped at rel_window. The output
// head is a single (E, C * predicted_levels) projection read as per-level
// score rows.
struct ModelConfig {
  ModelRole role = ModelRole::coarse;
  int32_t embed_dim = 64;      // E, divisible by heads
  int32_t layers = 4;
  int32_t heads = 4;
  int32_t n_levels = 2;        // input levels (coarse: Nc; c2f: Nc + Nf)
  int32_t vocab = 64;          // C, uniform across levels
  int32_t max_timesteps = 256;
  int32_t rel_window = 32;
  int32_t n_coarse = 0;        // coarse-to-fine only
  int32_t n_fine = 0;          // coarse-to-fine only

  int32_t predicted_levels() const {
    return role == ModelRole::coarse ? n_levels : n_fine;
  }
  // Grid column of the first predicted level.
  int32_t predicted_level_offset() const {
    return role == ModelRole::coarse ? 0 : n_coarse;
  }
  int32_t ff_dim() const { return 4 * embed_dim; }
  int32_t head_dim() const { return embed_dim / heads; }
  void validate() const;
};

// Byte offsets into the flat parameter vector. The flat view enumerates every
// scalar exactly once, which is what gradient checking and the optimizer
// iterate over.
struct ParamLayout {
  explicit ParamLayout(const ModelConfig& cfg);

  int64_t total = 0;

  int64_t embedding(int32_t level) const;  // (C+1) x E, row C = MASK
  int64_t rel_bias() const;                // heads x (2*rel_window + 1)
  struct Layer {
    int64_t ln1_gain, ln1_bias;
    int64_t wq, bq, wk, bk, wv, bv, wo, bo;
    int64_t ln2_gain, ln2_bias;
    int64_t w1, b1, w2, b2;  // E->4E, 4E->E
  };
  Layer layer(int32_t l) const;
  int64_t final_ln_gain() const;
  int64_t final_ln_bias() const;
  int64_t head_w() const;  // E x (predicted_levels * C)
  int64_t head_b() const;  // predicted_levels * C

 private:
  int32_t embed_dim_, heads_, rel_window_, n_levels_, vocab_, layers_, out_dim_;
  int64_t emb_table_, rel_table_, per_layer_, layers_base_, tail_base_;
};

template <typename T>
struct LogitsT {
  int32_t timesteps = 0;
  int32_t levels = 0;  // predicted levels
  int32_t vocab = 0;
  std::vector<T> data;  // [t][level][vocab]

  T at(int32_t t, int32_t n, int32_t c) const {
    return data[(size_t(t) * levels + n) * vocab + c];
  }
};
using Logits = LogitsT<float>;

// Training-time dropout on the two residual branches. rate = 0 disables it;
// rng must outlive the call when rate > 0.
struct DropoutSpec {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

template <typename T>
std::vector<T> init_parameters(const ModelConfig& cfg, uint64_t seed);

// Logits over every timestep. Masked positions contribute the MASK embedding,
// so the result depends only on unmasked tokens and the mask pattern.
template <typename T>
LogitsT<T> forward(const ModelConfig& cfg, std::span<const T> params,
                   const TokenGrid& grid, const MaskGrid& mask,
                   const DropoutSpec& dropout = {});

// Masked cross entropy: sum over masked positions of -log softmax(target).
// Reduction::mean divides by the masked count (0 masked positions -> 0).
// Logit level j scores grid column (targets.levels - logits.levels) + j.
template <typename T>
T masked_cross_entropy(const LogitsT<T>& logits, const TokenGrid& targets,
                       const MaskGrid& mask, Reduction reduction);

template <typename T>
struct LossGrad {
  T loss{};
  std::vector<T> grad;
};

// Exact gradient of the mean-reduced masked cross entropy with respect to
// every parameter. `inputs` supplies the unmasked context (masked entries are
// ignored), `targets` the labels at masked positions.
template <typename T>
LossGrad<T> loss_and_grad(const ModelConfig& cfg, std::span<const T> params,
                          const TokenGrid& inputs, const MaskGrid& mask,
                          const TokenGrid& targets, const DropoutSpec& dropout = {});

// Validated pass-through for the coarse-to-fine model: the grid must carry the
// full hierarchy and the mask may only select fine positions. Throws
// ArgumentError on a masked coarse entry.
struct C2fView {
  const TokenGrid* grid;
  const MaskGrid* mask;
};
C2fView c2f_view(const ModelConfig& cfg, const TokenGrid& full_grid,
                 const MaskGrid& fine_mask);

}  // namespace vamp
