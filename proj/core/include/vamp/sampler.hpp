#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "vamp/model.hpp"
#include "vamp/tokens.hpp"

namespace vamp {

struct SamplerConfig {
  int32_t steps = 24;         // decoding iterations t_T
  double temp0 = 6.5;         // initial confidence-noise temperature
  uint64_t seed = 0;
  bool record_trace = false;  // keep per-position accepted confidences
};

struct DecodeTrace {
  struct Iteration {
    int32_t iter = 0;           // 1-based
    int64_t masked_before = 0;  // masked count entering the iteration
    int64_t remask = 0;         // k = positions re-masked afterwards
    double temp = 0;
    double min_accepted_conf = 0;
    double max_accepted_conf = 0;
    std::vector<float> accepted_conf;  // only when record_trace is set
  };
  std::vector<Iteration> iterations;
  int32_t forward_passes = 0;
};

// Standard Gumbel(0,1) draw from a uniform u in (0,1): -ln(-ln u).
double gumbel_sample(double u);

// Confidence of a sampled token: log-probability plus temperature-scaled
// Gumbel noise.
double confidence(double logp, double temp, double g);

using ForwardFn = std::function<Logits(const TokenGrid&, const MaskGrid&)>;

// Parallel iterative decoding. Each iteration runs one forward pass,
// samples every currently-masked position from its categorical distribution
// as-is (no top-k / top-p), ranks samples by confidence with linearly
// annealed noise (temp_t = temp0 * (1 - t/steps), 0 at the last step), and
// re-masks the k = num_to_mask(t, steps, D0) least confident, where D0 is
// the initially masked count. Prompt-unmasked positions are never resampled.
// Confidence ties break by (timestep, level) order. D0 = 0 short-circuits to
// zero forward passes.
//
// The forward fn may return logits covering only a suffix of the grid's
// levels (logits level j scores grid column logit_level_offset + j); every
// masked position must fall inside the covered columns.
//
// Draw order is fixed: per iteration, masked positions are visited in
// timestep-major order and consume one uniform for the categorical sample
// followed by one uniform for the Gumbel noise, from a single mt19937_64
// stream seeded with cfg.seed.
std::pair<TokenGrid, DecodeTrace> decode_iterative(const ForwardFn& model,
                                                   const TokenGrid& initial,
                                                   const MaskGrid& prompt,
                                                   const SamplerConfig& cfg,
                                                   int32_t logit_level_offset = 0);

// One CSV row per iteration: iter, masked_before, k, temp, min/max accepted
// confidence.
void write_trace_csv(const DecodeTrace& trace, std::ostream& out);

}  // namespace vamp
