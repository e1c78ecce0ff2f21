#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "vamp/tokens.hpp"

namespace vamp {

// Prompt constructors produce masks over a T x N grid; true = generate,
// false = keep as conditioning. All constructors are pure functions of
// their arguments.

// Every timestep t with (t - offset) mod period == 0 is fully unmasked.
MaskGrid periodic_mask(int32_t t, int32_t n, int32_t period, int32_t offset = 0);

// The kept_levels coarsest levels are unmasked at every timestep.
MaskGrid compression_mask(int32_t t, int32_t n, int32_t kept_levels);

// First prefix_steps and last suffix_steps timesteps are fully unmasked.
MaskGrid inpaint_mask(int32_t t, int32_t n, int32_t prefix_steps, int32_t suffix_steps);

// Timesteps [b, b + width_steps) are fully unmasked for each beat b.
// Beats must be sorted and within [0, T).
MaskGrid beat_mask(int32_t t, int32_t n, const std::vector<int32_t>& beat_steps,
                   int32_t width_steps);

// Union of conditioning: masked iff masked in both. Commutative, associative,
// idempotent; the all-masked grid is the identity.
MaskGrid combine(const MaskGrid& a, const MaskGrid& b);

// Kept-token fraction times the codec bitrate.
double effective_bitrate(const MaskGrid& m, double codec_bps);

struct PeriodicSpec {
  int32_t period = 1;
  int32_t offset = 0;
};
struct CompressionSpec {
  int32_t kept_levels = 1;
};
struct InpaintSpec {
  int32_t prefix_steps = 0;
  int32_t suffix_steps = 0;
};
struct BeatSpec {
  int32_t width_steps = 1;
  std::string beat_file;             // as parsed; resolve before building
  std::vector<int32_t> beat_steps;   // resolved timestep indices
};

using PromptPart = std::variant<PeriodicSpec, CompressionSpec, InpaintSpec, BeatSpec>;

// One or more parts combined; the built mask is the combine() of all parts.
struct PromptSpec {
  std::vector<PromptPart> parts;
  std::string text;  // original form, for logs and CSVs
};

// Text form, '+'-separated parts:
//   periodic:P=16,offset=0
//   compression:Nk=1
//   inpaint:prefix=57,suffix=57
//   beat:width=4,file=beats.txt
// Throws ArgumentError on unknown variants or keys.
PromptSpec parse_prompt(const std::string& text);

// Builds the combined mask. Beat parts must have beat_steps resolved (the
// CLI loads beat files; the library never touches the filesystem here).
MaskGrid build_prompt_mask(const PromptSpec& spec, int32_t t, int32_t n);

}  // namespace vamp
