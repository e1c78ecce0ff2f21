#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vamp/tokenizer.hpp"

namespace vamp {

// Genre-like parameter bundle shared by an "artist": scale, spectral richness
// and percussive character. Two sufficiently different presets produce
// embedding distributions that the Frechet metric separates.
struct SynthPreset {
  std::string name;
  std::vector<int32_t> scale_degrees;  // semitone offsets from the root
  int32_t harmonics = 4;               // partials per chord tone
  double click_gain = 0.4;             // percussive transient level on beats
  double decay_s = 0.5;                // chord envelope time constant
  double base_freq = 110.0;            // Hz
};

enum class Loudness : uint8_t {
  peak,    // peak-normalize to -1 dBFS
  rms24,   // RMS-normalize to -24 dBFS
};

struct ClipSpec {
  uint64_t seed = 0;
  double tempo_bpm = 120.0;
  double duration_s = 2.0;
  int32_t sample_rate = 8000;
  SynthPreset preset;
  Loudness loudness = Loudness::peak;
};

struct Clip {
  Signal audio;
  std::vector<double> beat_times;  // seconds, k * 60/tempo for k >= 0
};

// Deterministic music-like signal: a chord progression (harmonics with
// exponential decay, restruck each 4-beat bar, root drawn from the preset
// scale) plus click transients exactly on the beat grid.
Clip generate_clip(const ClipSpec& spec);

// floor(beat_time * token_rate), deduplicated, sorted, clipped to [0, T).
std::vector<int32_t> beats_to_steps(const std::vector<double>& beat_times,
                                    double token_rate, int32_t t_count);

struct CorpusSplits {
  std::vector<ClipSpec> train, val, test;
};

struct CorpusParams {
  double duration_s = 2.0;
  int32_t sample_rate = 8000;
  int32_t artists_per_split = 2;  // presets are never shared across splits
};

// Deterministic 90/5/5 split with disjoint clip-seed ranges and disjoint
// artist presets per split. n_clips >= 3 so every split is non-empty.
CorpusSplits build_corpus(int32_t n_clips, uint64_t split_seed,
                          const CorpusParams& params = {});

// Deterministic preset derived from an artist seed.
SynthPreset make_artist_preset(uint64_t artist_seed);

}  // namespace vamp
