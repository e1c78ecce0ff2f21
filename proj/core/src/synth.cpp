#include "vamp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vamp/errors.hpp"

namespace vamp {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

const std::vector<std::vector<int32_t>> kScales = {
    {0, 2, 4, 5, 7, 9, 11},   // major
    {0, 2, 3, 5, 7, 8, 10},   // natural minor
    {0, 3, 5, 7, 10},         // minor pentatonic
    {0, 2, 4, 7, 9},          // major pentatonic
};

}  // namespace

SynthPreset make_artist_preset(uint64_t artist_seed) {
  std::mt19937_64 rng(splitmix64(artist_seed));
  SynthPreset p;
  p.name = "artist-" + std::to_string(artist_seed);
  p.scale_degrees = kScales[size_t(rng() % kScales.size())];
  p.harmonics = 2 + int32_t(rng() % 5);  // 2..6
  std::uniform_real_distribution<double> gain(0.2, 0.5);
  std::uniform_real_distribution<double> decay(0.3, 0.8);
  std::uniform_real_distribution<double> base(98.0, 147.0);  // G2..D3
  p.click_gain = gain(rng);
  p.decay_s = decay(rng);
  p.base_freq = base(rng);
  return p;
}

Clip generate_clip(const ClipSpec& spec) {
  if (spec.tempo_bpm <= 0 || spec.duration_s <= 0 || spec.sample_rate <= 0) {
    throw ArgumentError("clip spec needs positive tempo, duration and sample rate");
  }
  if (spec.preset.scale_degrees.empty() || spec.preset.harmonics < 1) {
    throw ArgumentError("clip preset needs scale degrees and harmonics >= 1");
  }
  const int32_t sr = spec.sample_rate;
  const int64_t n = int64_t(spec.duration_s * sr);
  const double beat_s = 60.0 / spec.tempo_bpm;
  const double bar_s = 4.0 * beat_s;

  Clip clip;
  clip.audio.sample_rate = sr;
  clip.audio.samples.assign(size_t(n), 0.0f);
  for (int32_t k = 0; k * beat_s < spec.duration_s; ++k) {
    clip.beat_times.push_back(k * beat_s);
  }

  std::mt19937_64 rng(splitmix64(spec.seed));
  std::vector<double> buf(size_t(n), 0.0);

  // Chord progression: root drawn from the scale per bar, harmonics with
  // exponential decay restruck at each bar boundary.
  const auto& degrees = spec.preset.scale_degrees;
  const double nyquist = sr / 2.0;
  for (int32_t bar = 0; bar * bar_s < spec.duration_s; ++bar) {
    int32_t degree = degrees[size_t(rng() % degrees.size())];
    double root = spec.preset.base_freq * std::pow(2.0, degree / 12.0);
    double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    int64_t start = int64_t(bar * bar_s * sr);
    int64_t stop = std::min<int64_t>(n, int64_t((bar + 1) * bar_s * sr));
    for (int32_t h = 1; h <= spec.preset.harmonics; ++h) {
      double freq = root * h;
      if (freq >= nyquist * 0.95) break;
      double amp = 0.6 / h;
      double w = 2.0 * std::numbers::pi * freq / sr;
      for (int64_t i = start; i < stop; ++i) {
        double t_in_bar = double(i - start) / sr;
        buf[size_t(i)] += amp * std::exp(-t_in_bar / spec.preset.decay_s) *
                          std::sin(w * double(i) + phase * h);
      }
    }
  }

  // Click transients exactly on the beat grid: damped high-frequency burst.
  const double click_freq = std::min(2500.0, nyquist * 0.7);
  const int64_t click_len = int64_t(0.02 * sr);
  for (double b : clip.beat_times) {
    int64_t start = int64_t(b * sr);
    for (int64_t i = start; i < std::min(n, start + click_len); ++i) {
      double tau = double(i - start) / sr;
      buf[size_t(i)] += spec.preset.click_gain * std::exp(-tau / 0.003) *
                        std::sin(2.0 * std::numbers::pi * click_freq * tau);
    }
  }

  if (spec.loudness == Loudness::peak) {
    double peak = 0;
    for (double v : buf) peak = std::max(peak, std::abs(v));
    double target = std::pow(10.0, -1.0 / 20.0);
    double scale = peak > 0 ? target / peak : 0.0;
    for (size_t i = 0; i < buf.size(); ++i) clip.audio.samples[i] = float(buf[i] * scale);
  } else {
    double sumsq = 0;
    for (double v : buf) sumsq += v * v;
    double rms = std::sqrt(sumsq / double(buf.size()));
    double target = std::pow(10.0, -24.0 / 20.0);
    double scale = rms > 0 ? target / rms : 0.0;
    for (size_t i = 0; i < buf.size(); ++i) {
      clip.audio.samples[i] = float(std::clamp(buf[i] * scale, -1.0, 1.0));
    }
  }
  return clip;
}

std::vector<int32_t> beats_to_steps(const std::vector<double>& beat_times,
                                    double token_rate, int32_t t_count) {
  if (token_rate <= 0) throw ArgumentError("token rate must be positive");
  std::vector<int32_t> steps;
  for (double b : beat_times) {
    if (b < 0) throw ArgumentError("beat times must be non-negative");
    int32_t s = int32_t(std::floor(b * token_rate));
    if (s < t_count) steps.push_back(s);
  }
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

CorpusSplits build_corpus(int32_t n_clips, uint64_t split_seed,
                          const CorpusParams& params) {
  if (n_clips < 3) throw ArgumentError("corpus needs at least 3 clips");
  // 90/5/5 with every split non-empty.
  int32_t n_val = std::max(1, n_clips / 20);
  int32_t n_test = std::max(1, n_clips / 20);
  int32_t n_train = n_clips - n_val - n_test;

  CorpusSplits splits;
  auto fill = [&](std::vector<ClipSpec>& out, int32_t count, int32_t split_index,
                  int64_t seed_base) {
    // Disjoint artist pools: artist ids partitioned by split.
    std::vector<SynthPreset> presets;
    for (int32_t a = 0; a < params.artists_per_split; ++a) {
      uint64_t artist_id = uint64_t(split_index) * 1000 + uint64_t(a);
      presets.push_back(make_artist_preset(splitmix64(split_seed) ^ artist_id));
    }
    for (int32_t i = 0; i < count; ++i) {
      ClipSpec spec;
      spec.seed = splitmix64(split_seed ^ uint64_t(seed_base + i));
      spec.duration_s = params.duration_s;
      spec.sample_rate = params.sample_rate;
      spec.preset = presets[size_t(i) % presets.size()];
      std::mt19937_64 rng(spec.seed);
      spec.tempo_bpm = std::uniform_real_distribution<double>(100.0, 140.0)(rng);
      out.push_back(std::move(spec));
    }
  };
  // Seed ranges per split are disjoint by construction.
  fill(splits.train, n_train, 0, 0);
  fill(splits.val, n_val, 1, n_clips);
  fill(splits.test, n_test, 2, 2 * int64_t(n_clips));
  return splits;
}

}  // namespace vamp
