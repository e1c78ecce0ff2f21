#pragma once

#include <string>
#include <vector>

#include "vamp/tokenizer.hpp"

namespace vamp {

// 16-bit mono PCM only. Samples are clamped to [-1, 1] on write.
void write_wav(const Signal& x, const std::string& path);
Signal read_wav(const std::string& path);

// Beat grid files: one beat time in seconds per line.
void write_beat_file(const std::vector<double>& beat_times, const std::string& path);
std::vector<double> read_beat_file(const std::string& path);

}  // namespace vamp
