#pragma once

#include <cstdint>
#include <random>

#include "vamp/tokens.hpp"

namespace vamp {

// Cosine masking schedule: cos(pi*r/2). Maps progress fraction in
// [0,1] to masked fraction; endpoints 1 and 0, monotone
// non-increasing. Throws ArgumentError outside [0,1].
double schedule_gamma(double r);

// Number of positions to leave masked after iteration t of t_T, out of
// d_total tokens: round-half-to-even(schedule_gamma(t/t_T) * d_total), clamped to
// [0, d_total]. t = 0 is accepted for inspection and yields d_total.
int64_t num_to_mask(int64_t t, int64_t t_total, int64_t d_total);

// Training mask: draw u ~ Uniform[0,1), then mask ceil(schedule_gamma(u)*T*N)
// positions chosen uniformly without replacement. Deterministic given rng.
MaskGrid sample_training_mask(int32_t t, int32_t n, std::mt19937_64& rng);

// Coarse-to-fine variant: the n_coarse leading columns stay unmasked and the
// draw covers only the T*n_fine fine positions.
MaskGrid sample_c2f_training_mask(int32_t t, int32_t n_coarse, int32_t n_fine,
                                  std::mt19937_64& rng);

}  // namespace vamp
