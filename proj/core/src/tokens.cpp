#include "vamp/tokens.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "vamp/errors.hpp"

namespace vamp {

namespace {
constexpr char kTokenMagic[5] = "VMPT";
constexpr char kMaskMagic[5] = "VMPM";
constexpr uint8_t kVersion = 1;
constexpr int32_t kMaxLevels = 255;  // N is stored as u8
}  // namespace

TokenGrid::TokenGrid(int32_t t, int32_t n, std::vector<uint16_t> vocab)
    : timesteps(t), levels(n), vocab_sizes(std::move(vocab)) {
  if (t < 1 || n < 1) throw ArgumentError("TokenGrid needs T >= 1 and N >= 1");
  if (int32_t(vocab_sizes.size()) != n) {
    throw ArgumentError("TokenGrid vocab_sizes length must equal N");
  }
  data.assign(size_t(t) * n, 0);
}

TokenGrid TokenGrid::uniform(int32_t t, int32_t n, uint16_t vocab_size) {
  return TokenGrid(t, n, std::vector<uint16_t>(size_t(n), vocab_size));
}

void TokenGrid::validate() const {
  if (timesteps < 1 || levels < 1) {
    throw ArgumentError("TokenGrid needs T >= 1 and N >= 1");
  }
  if (levels > kMaxLevels) throw ArgumentError("TokenGrid supports at most 255 levels");
  if (int32_t(vocab_sizes.size()) != levels) {
    throw ArgumentError("TokenGrid vocab_sizes length must equal N");
  }
  for (uint16_t c : vocab_sizes) {
    if (c == 0) throw ArgumentError("TokenGrid vocabulary sizes must be >= 1");
  }
  if (int64_t(data.size()) != size()) {
    throw ArgumentError("TokenGrid data size must equal T*N");
  }
  for (int32_t t = 0; t < timesteps; ++t) {
    for (int32_t n = 0; n < levels; ++n) {
      if (at(t, n) >= vocab_sizes[n]) {
        throw ArgumentError("token out of range at (" + std::to_string(t) + "," +
                            std::to_string(n) + ")");
      }
    }
  }
}

MaskGrid::MaskGrid(int32_t t, int32_t n, bool masked) : timesteps(t), levels(n) {
  if (t < 1 || n < 1) throw ArgumentError("MaskGrid needs T >= 1 and N >= 1");
  data.assign(size_t(t) * n, masked ? 1 : 0);
}

int64_t masked_count(const MaskGrid& m) {
  int64_t count = 0;
  for (uint8_t v : m.data) count += (v != 0);
  return count;
}

TokenGrid slice_timesteps(const TokenGrid& g, int32_t start, int32_t count) {
  if (start < 0 || count < 1 || start + count > g.timesteps) {
    throw ArgumentError("timestep slice out of range");
  }
  TokenGrid out(count, g.levels, g.vocab_sizes);
  std::copy(g.data.begin() + size_t(start) * g.levels,
            g.data.begin() + size_t(start + count) * g.levels, out.data.begin());
  return out;
}

TokenGrid slice_levels(const TokenGrid& g, int32_t first, int32_t count) {
  if (first < 0 || count < 1 || first + count > g.levels) {
    throw ArgumentError("level slice out of range");
  }
  std::vector<uint16_t> vocab(g.vocab_sizes.begin() + first,
                              g.vocab_sizes.begin() + first + count);
  TokenGrid out(g.timesteps, count, std::move(vocab));
  for (int32_t t = 0; t < g.timesteps; ++t) {
    for (int32_t n = 0; n < count; ++n) out.at(t, n) = g.at(t, first + n);
  }
  return out;
}

size_t write_stream(const TokenGrid& g, std::ostream& sink) {
  g.validate();
  detail::Writer w(sink);
  w.magic(kTokenMagic);
  w.u8(kVersion);
  w.u8(uint8_t(g.levels));
  w.u32(uint32_t(g.timesteps));
  for (uint16_t c : g.vocab_sizes) w.u16(c);
  for (uint16_t tok : g.data) w.u16(tok);
  return w.offset();
}

TokenGrid read_stream(std::istream& source) {
  detail::Reader r(source);
  r.expect_magic(kTokenMagic, "token stream");
  uint8_t version = r.u8();
  if (version != kVersion) {
    throw FormatError("unsupported token stream version " + std::to_string(version));
  }
  int32_t n = r.u8();
  int32_t t = int32_t(r.u32());
  if (n < 1 || t < 1) throw FormatError("token stream header has empty shape");
  TokenGrid g;
  g.timesteps = t;
  g.levels = n;
  g.vocab_sizes.resize(size_t(n));
  for (auto& c : g.vocab_sizes) c = r.u16();
  g.data.resize(size_t(t) * n);
  for (size_t i = 0; i < g.data.size(); ++i) {
    size_t at = r.offset();
    g.data[i] = r.u16();
    if (g.data[i] >= g.vocab_sizes[i % n]) {
      throw FormatError("token out of range at offset " + std::to_string(at));
    }
  }
  g.validate();
  return g;
}

size_t write_mask(const MaskGrid& m, std::ostream& sink) {
  if (m.timesteps < 1 || m.levels < 1 || m.levels > kMaxLevels) {
    throw ArgumentError("mask shape out of range");
  }
  detail::Writer w(sink);
  w.magic(kMaskMagic);
  w.u8(kVersion);
  w.u8(uint8_t(m.levels));
  w.u32(uint32_t(m.timesteps));
  size_t nbytes = (m.data.size() + 7) / 8;
  std::vector<uint8_t> packed(nbytes, 0);
  for (size_t i = 0; i < m.data.size(); ++i) {
    if (m.data[i]) packed[i / 8] |= uint8_t(1u << (i % 8));
  }
  w.bytes(packed.data(), packed.size());
  return w.offset();
}

MaskGrid read_mask(std::istream& source) {
  detail::Reader r(source);
  r.expect_magic(kMaskMagic, "mask sidecar");
  uint8_t version = r.u8();
  if (version != kVersion) {
    throw FormatError("unsupported mask version " + std::to_string(version));
  }
  int32_t n = r.u8();
  int32_t t = int32_t(r.u32());
  if (n < 1 || t < 1) throw FormatError("mask header has empty shape");
  MaskGrid m(t, n);
  size_t nbytes = (m.data.size() + 7) / 8;
  std::vector<uint8_t> packed(nbytes);
  r.bytes(packed.data(), nbytes);
  for (size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = (packed[i / 8] >> (i % 8)) & 1u;
  }
  return m;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return f;
}

}  // namespace

void save_token_stream(const TokenGrid& g, const std::string& path) {
  auto f = open_out(path);
  write_stream(g, f);
}

TokenGrid load_token_stream(const std::string& path) {
  auto f = open_in(path);
  return read_stream(f);
}

void save_mask(const MaskGrid& m, const std::string& path) {
  auto f = open_out(path);
  write_mask(m, f);
}

MaskGrid load_mask(const std::string& path) {
  auto f = open_in(path);
  return read_mask(f);
}

}  // namespace vamp
