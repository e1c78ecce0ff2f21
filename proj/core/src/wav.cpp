#include "vamp/wav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "vamp/errors.hpp"

namespace vamp {

void write_wav(const Signal& x, const std::string& path) {
  if (x.sample_rate <= 0) throw ArgumentError("wav needs a positive sample rate");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  detail::Writer w(f);
  const uint32_t data_bytes = uint32_t(x.samples.size() * 2);
  w.magic("RIFF");
  w.u32(36 + data_bytes);
  w.magic("WAVE");
  w.magic("fmt ");
  w.u32(16);
  w.u16(1);  // PCM
  w.u16(1);  // mono
  w.u32(uint32_t(x.sample_rate));
  w.u32(uint32_t(x.sample_rate) * 2);
  w.u16(2);   // block align
  w.u16(16);  // bits per sample
  w.magic("data");
  w.u32(data_bytes);
  for (float v : x.samples) {
    float c = std::clamp(v, -1.0f, 1.0f);
    w.u16(uint16_t(int16_t(std::lrint(c * 32767.0f))));
  }
}

Signal read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  detail::Reader r(f);
  r.expect_magic("RIFF", "wav");
  r.u32();
  r.expect_magic("WAVE", "wav");

  Signal x;
  bool got_fmt = false;
  while (true) {
    char id[4];
    r.bytes(id, 4);
    uint32_t chunk = r.u32();
    std::string tag(id, 4);
    if (tag == "fmt ") {
      if (chunk < 16) throw FormatError("wav fmt chunk too short");
      uint16_t format = r.u16();
      uint16_t channels = r.u16();
      uint32_t rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      uint16_t bits = r.u16();
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError("only 16-bit mono PCM wav is supported");
      }
      x.sample_rate = int32_t(rate);
      for (uint32_t i = 16; i < chunk; ++i) r.u8();
      got_fmt = true;
    } else if (tag == "data") {
      if (!got_fmt) throw FormatError("wav data chunk before fmt");
      size_t count = chunk / 2;
      x.samples.resize(count);
      for (size_t i = 0; i < count; ++i) {
        x.samples[i] = std::clamp(float(int16_t(r.u16())) / 32767.0f, -1.0f, 1.0f);
      }
      return x;
    } else {
      for (uint32_t i = 0; i < chunk; ++i) r.u8();  // skip unknown chunk
    }
  }
}

void write_beat_file(const std::vector<double>& beat_times, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.precision(9);
  for (double b : beat_times) f << b << '\n';
  if (!f) throw IoError("write failed: " + path);
}

std::vector<double> read_beat_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::vector<double> beats;
  double v;
  while (f >> v) beats.push_back(v);
  return beats;
}

}  // namespace vamp
