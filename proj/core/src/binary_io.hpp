#pragma once

// Little-endian stream primitives shared by the binary formats. Internal to
// the library; not installed.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "vamp/errors.hpp"

namespace vamp::detail {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), std::streamsize(n));
    if (!out_) throw IoError("write failed at offset " + std::to_string(offset_));
    offset_ += n;
  }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u16(uint16_t v) {
    uint8_t b[2] = {uint8_t(v & 0xff), uint8_t(v >> 8)};
    bytes(b, 2);
  }
  void u32(uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = uint8_t(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
    bytes(b, 8);
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void magic(const char (&m)[5]) { bytes(m, 4); }

  size_t offset() const { return offset_; }

 private:
  std::ostream& out_;
  size_t offset_ = 0;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), std::streamsize(n));
    if (size_t(in_.gcount()) != n) {
      throw FormatError("truncated input at offset " + std::to_string(offset_));
    }
    offset_ += n;
  }
  uint8_t u8() {
    uint8_t v;
    bytes(&v, 1);
    return v;
  }
  uint16_t u16() {
    uint8_t b[2];
    bytes(b, 2);
    return uint16_t(b[0] | (uint16_t(b[1]) << 8));
  }
  uint32_t u32() {
    uint8_t b[4];
    bytes(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint8_t b[8];
    bytes(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  // Consumes 4 bytes and checks them against the expected magic.
  void expect_magic(const char (&m)[5], const char* what) {
    char got[4];
    size_t at = offset_;
    bytes(got, 4);
    if (std::memcmp(got, m, 4) != 0) {
      throw FormatError(std::string("bad ") + what + " magic at offset " + std::to_string(at));
    }
  }

  size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  size_t offset_ = 0;
};

}  // namespace vamp::detail
