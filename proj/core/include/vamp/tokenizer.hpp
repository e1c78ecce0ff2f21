#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vamp/tokens.hpp"

namespace vamp {

struct Signal {
  int32_t sample_rate = 0;   // Hz, > 0
  std::vector<float> samples;  // amplitudes in [-1, 1], finite

  int64_t length() const { return int64_t(samples.size()); }
  double duration_s() const { return double(samples.size()) / sample_rate; }
};

// One residual quantizer stage: C entries of dimension D, row-major.
// Entry 0 is pinned to the zero vector, which makes residual norms
// non-increasing across stages and tokenizes silence to all-zeros.
struct Codebook {
  int32_t level = 0;
  int32_t dim = 0;
  std::vector<float> entries;  // C x D

  int32_t entry_count() const { return int32_t(entries.size() / size_t(dim)); }
  const float* entry(int32_t c) const { return entries.data() + size_t(c) * dim; }
};

enum class Window : uint8_t { hann = 0 };

// Residual vector quantizer over windowed time-domain frames. Frame features
// are the windowed samples themselves (D = frame_len); there is no learned
// encoder in front of the quantizer cascade. Immutable once fitted.
struct RvqCodec {
  int32_t sample_rate = 8000;
  int32_t frame_len = 256;
  int32_t hop = 128;
  int32_t stages = 6;        // N, coarse -> fine
  int32_t entries = 64;      // C per codebook
  int32_t dim = 256;         // D = frame_len
  Window window = Window::hann;
  std::vector<Codebook> codebooks;

  double token_rate() const { return double(sample_rate) / hop; }
  // Bits per second of the full token stream: token_rate * N * log2(C).
  double bitrate_bps() const;
  void validate() const;
};

struct RvqFitParams {
  int32_t sample_rate = 8000;
  int32_t frame_len = 256;
  int32_t hop = 128;
  int32_t stages = 6;
  int32_t entries = 64;
  int32_t kmeans_iters = 12;
  uint64_t seed = 0;
};

// The half-sample-offset Hann analysis window. Strictly positive, so the
// per-sample overlap-add normalization in decode() is defined everywhere.
std::vector<float> analysis_window(int32_t frame_len);

// Windowed frames of x at (frame_len, hop): T = 1 + floor((len-frame_len)/hop).
std::vector<std::vector<float>> extract_frames(const Signal& x, int32_t frame_len,
                                               int32_t hop);

// Fits the residual cascade: stage i runs k-means with C-1 learned centroids
// on the residuals left by stages < i, then prepends the zero vector as
// entry 0. k-means++ seeding from params.seed; empty clusters are re-seeded
// from the farthest point; non-convergence returns best-so-far.
RvqCodec fit_rvq(const std::vector<std::vector<float>>& training_frames,
                 const RvqFitParams& params);

// Greedy residual encode: per frame, each stage picks the nearest entry
// (ties to the lowest index) and passes the remaining residual on.
TokenGrid encode(const RvqCodec& codec, const Signal& x);

// Sum of the chosen entries per timestep, recombined by windowed overlap-add
// with per-sample normalization (constant signals round-trip to constants).
// Output length is (T-1)*hop + frame_len.
Signal decode(const RvqCodec& codec, const TokenGrid& g);

// Codec file format (little-endian): magic "VMPC", version u8 = 1,
// sample_rate u32, frame_len u32, hop u32, N u8, C u16, D u32,
// then N*C*D 32-bit floats.
size_t write_codec(const RvqCodec& codec, std::ostream& sink);
RvqCodec read_codec(std::istream& source);
void save_codec(const RvqCodec& codec, const std::string& path);
RvqCodec load_codec(const std::string& path);

}  // namespace vamp
