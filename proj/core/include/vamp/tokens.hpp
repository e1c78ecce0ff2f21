#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vamp {

// T x N grid of discrete codebook indices. Row = timestep, column = quantizer
// level; level 0 is the coarsest. Values are immutable by convention once a
// grid leaves its producer, so grids are safe to share across readers.
struct TokenGrid {
  int32_t timesteps = 0;                  // T
  int32_t levels = 0;                     // N
  std::vector<uint16_t> vocab_sizes;      // one entry per level
  std::vector<uint16_t> data;             // timestep-major, size T*N

  TokenGrid() = default;
  TokenGrid(int32_t t, int32_t n, std::vector<uint16_t> vocab);
  static TokenGrid uniform(int32_t t, int32_t n, uint16_t vocab_size);

  uint16_t at(int32_t t, int32_t n) const { return data[size_t(t) * levels + n]; }
  uint16_t& at(int32_t t, int32_t n) { return data[size_t(t) * levels + n]; }
  int64_t size() const { return int64_t(timesteps) * levels; }

  // Throws ArgumentError if shape fields are inconsistent or any token is
  // outside its level vocabulary.
  void validate() const;

  bool operator==(const TokenGrid&) const = default;
};

// T x N boolean sidecar; true = masked. Encodes both training masks and
// prompts (the prompt conditioning is exactly the unmasked set).
struct MaskGrid {
  int32_t timesteps = 0;
  int32_t levels = 0;
  std::vector<uint8_t> data;              // 0/1, timestep-major

  MaskGrid() = default;
  MaskGrid(int32_t t, int32_t n, bool masked = false);

  bool at(int32_t t, int32_t n) const { return data[size_t(t) * levels + n] != 0; }
  void set(int32_t t, int32_t n, bool m) { data[size_t(t) * levels + n] = m ? 1 : 0; }
  int64_t size() const { return int64_t(timesteps) * levels; }

  bool same_shape(const TokenGrid& g) const {
    return timesteps == g.timesteps && levels == g.levels;
  }

  bool operator==(const MaskGrid&) const = default;
};

int64_t masked_count(const MaskGrid& m);

// Copies timesteps [start, start+count) into a new grid.
TokenGrid slice_timesteps(const TokenGrid& g, int32_t start, int32_t count);
// Copies levels [first, first+count) into a new grid (prefix slicing keeps
// the coarsest levels).
TokenGrid slice_levels(const TokenGrid& g, int32_t first, int32_t count);

// Token-stream binary format (all little-endian):
//   magic "VMPT", version u8 = 1, N u8, T u32,
//   N x u16 vocabulary sizes, then T*N x u16 tokens in timestep-major order.
// Returns the number of bytes written. The grid is validated first.
size_t write_stream(const TokenGrid& g, std::ostream& sink);
TokenGrid read_stream(std::istream& source);

// Mask sidecar format (little-endian):
//   magic "VMPM", version u8 = 1, N u8, T u32,
//   ceil(T*N/8) bytes of flags, timestep-major, LSB-first, bit set = masked.
size_t write_mask(const MaskGrid& m, std::ostream& sink);
MaskGrid read_mask(std::istream& source);

// File helpers for the two formats above.
void save_token_stream(const TokenGrid& g, const std::string& path);
TokenGrid load_token_stream(const std::string& path);
void save_mask(const MaskGrid& m, const std::string& path);
MaskGrid load_mask(const std::string& path);

}  // namespace vamp
