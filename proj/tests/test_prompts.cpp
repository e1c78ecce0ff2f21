#include <cmath>

#include "doctest.h"
#include "vamp/errors.hpp"
#include "vamp/prompts.hpp"

using namespace vamp;

namespace {

int32_t unmasked_timesteps(const MaskGrid& m) {
  int32_t count = 0;
  for (int32_t t = 0; t < m.timesteps; ++t) {
    bool all_clear = true;
    for (int32_t n = 0; n < m.levels; ++n) all_clear &= !m.at(t, n);
    count += all_clear ? 1 : 0;
  }
  return count;
}

}  // namespace

TEST_CASE("periodic mask keeps every P-th timestep") {
  CHECK(masked_count(periodic_mask(8, 3, 1)) == 0);

  MaskGrid m = periodic_mask(8, 2, 2, 0);
  for (int32_t t : {0, 2, 4, 6}) {
    CHECK_FALSE(m.at(t, 0));
    CHECK_FALSE(m.at(t, 1));
  }
  for (int32_t t : {1, 3, 5, 7}) CHECK(m.at(t, 0));

  // Kept-timestep count is ceil((T - offset) / P).
  for (int32_t t_len : {7, 8, 574}) {
    for (int32_t p : {1, 2, 3, 16}) {
      for (int32_t offset = 0; offset < p; ++offset) {
        MaskGrid g = periodic_mask(t_len, 2, p, offset);
        int32_t expected = (t_len - offset + p - 1) / p;
        CHECK(unmasked_timesteps(g) == expected);
      }
    }
  }
  // 10 s at ~57 Hz with P=16 keeps 36 conditioning timesteps.
  CHECK(unmasked_timesteps(periodic_mask(574, 14, 16, 0)) == 36);

  CHECK_THROWS_AS(periodic_mask(8, 2, 0, 0), ArgumentError);
  CHECK_THROWS_AS(periodic_mask(8, 2, 4, 4), ArgumentError);
  CHECK_THROWS_AS(periodic_mask(8, 2, 4, -1), ArgumentError);
}

TEST_CASE("periodic kept fraction is exactly 1/P when P divides T") {
  for (int32_t p : {1, 2, 4, 8}) {
    MaskGrid m = periodic_mask(64, 5, p, 0);
    int64_t kept = m.size() - masked_count(m);
    CHECK(double(kept) / double(m.size()) == 1.0 / p);
  }
}

TEST_CASE("compression mask keeps coarse level prefixes") {
  CHECK(masked_count(compression_mask(6, 4, 4)) == 0);
  CHECK(masked_count(compression_mask(6, 4, 0)) == 24);

  MaskGrid m = compression_mask(10, 14, 1);
  int64_t kept = m.size() - masked_count(m);
  CHECK(double(kept) / double(m.size()) == doctest::Approx(1.0 / 14).epsilon(1e-12));
  for (int32_t t = 0; t < 10; ++t) {
    CHECK_FALSE(m.at(t, 0));
    CHECK(m.at(t, 1));
  }
  CHECK_THROWS_AS(compression_mask(6, 4, 5), ArgumentError);
}

TEST_CASE("inpaint mask keeps prefix and suffix context") {
  // One second of context at 57 Hz on each side.
  MaskGrid m = inpaint_mask(574, 4, 57, 57);
  CHECK(unmasked_timesteps(m) == 114);
  CHECK_FALSE(m.at(0, 0));
  CHECK_FALSE(m.at(56, 3));
  CHECK(m.at(57, 0));
  CHECK(m.at(516, 0));
  CHECK_FALSE(m.at(517, 0));

  CHECK(masked_count(inpaint_mask(8, 2, 8, 0)) == 0);
  CHECK(masked_count(inpaint_mask(8, 2, 0, 0)) == 16);
  CHECK_THROWS_AS(inpaint_mask(8, 2, 5, 4), ArgumentError);
}

TEST_CASE("beat mask opens windows to the right of each beat") {
  // 75 ms at 57 Hz is about 4 timesteps.
  CHECK(std::lround(0.075 * 57.0) == 4);

  MaskGrid m = beat_mask(20, 2, {0, 10}, 4);
  for (int32_t t : {0, 1, 2, 3, 10, 11, 12, 13}) CHECK_FALSE(m.at(t, 0));
  for (int32_t t : {4, 9, 14, 19}) CHECK(m.at(t, 0));

  CHECK(masked_count(beat_mask(12, 3, {}, 4)) == 36);
  CHECK(masked_count(beat_mask(12, 3, {0}, 12)) == 0);
  CHECK_THROWS_AS(beat_mask(12, 3, {5, 1}, 2), ArgumentError);
  CHECK_THROWS_AS(beat_mask(12, 3, {12}, 2), ArgumentError);
}

TEST_CASE("combine is the union of conditioning") {
  MaskGrid periodic = periodic_mask(8, 4, 2, 0);
  MaskGrid compression = compression_mask(8, 4, 1);
  MaskGrid all_masked(8, 4, true);
  MaskGrid none_masked(8, 4);

  CHECK(combine(periodic, all_masked) == periodic);       // identity
  CHECK(combine(periodic, none_masked) == none_masked);   // absorbing
  CHECK(combine(periodic, compression) == combine(compression, periodic));
  CHECK(combine(periodic, periodic) == periodic);         // idempotent
  MaskGrid beat = beat_mask(8, 4, {3}, 2);
  CHECK(combine(combine(periodic, compression), beat) ==
        combine(periodic, combine(compression, beat)));

  // Level 0 unmasked everywhere; all levels unmasked on even timesteps.
  MaskGrid both = combine(periodic, compression);
  for (int32_t t = 0; t < 8; ++t) {
    CHECK_FALSE(both.at(t, 0));
    for (int32_t n = 1; n < 4; ++n) CHECK(both.at(t, n) == (t % 2 == 1));
  }

  CHECK_THROWS_AS(combine(periodic, MaskGrid(9, 4)), ArgumentError);
}

TEST_CASE("effective bitrate scales with the kept fraction") {
  MaskGrid none(10, 14);
  CHECK(effective_bitrate(none, 8000.0) == 8000.0);
  MaskGrid all(10, 14, true);
  CHECK(effective_bitrate(all, 8000.0) == 0.0);
  // One of 14 codebooks kept out of an 8 kbps stream.
  CHECK(effective_bitrate(compression_mask(10, 14, 1), 8000.0) ==
        doctest::Approx(8000.0 / 14).epsilon(1e-9));
  for (int32_t p : {1, 2, 4, 8}) {
    CHECK(effective_bitrate(periodic_mask(64, 6, p, 0), 8000.0) ==
          doctest::Approx(8000.0 / p).epsilon(1e-9));
  }
  // Combining prompts never lowers the bitrate.
  MaskGrid a = periodic_mask(16, 6, 4, 0);
  MaskGrid b = compression_mask(16, 6, 2);
  double combined = effective_bitrate(combine(a, b), 8000.0);
  CHECK(combined >= effective_bitrate(a, 8000.0));
  CHECK(combined >= effective_bitrate(b, 8000.0));
  CHECK_THROWS_AS(effective_bitrate(none, 0.0), ArgumentError);
}

TEST_CASE("prompt text parsing") {
  PromptSpec p = parse_prompt("periodic:P=16,offset=3");
  REQUIRE(p.parts.size() == 1);
  auto& periodic = std::get<PeriodicSpec>(p.parts[0]);
  CHECK(periodic.period == 16);
  CHECK(periodic.offset == 3);

  PromptSpec combo = parse_prompt("compression:Nk=1+periodic:P=2");
  REQUIRE(combo.parts.size() == 2);
  CHECK(std::get<CompressionSpec>(combo.parts[0]).kept_levels == 1);
  CHECK(std::get<PeriodicSpec>(combo.parts[1]).period == 2);
  MaskGrid mask = build_prompt_mask(combo, 8, 4);
  CHECK(mask == combine(compression_mask(8, 4, 1), periodic_mask(8, 4, 2, 0)));

  PromptSpec inpaint = parse_prompt("inpaint:prefix=57,suffix=57");
  CHECK(std::get<InpaintSpec>(inpaint.parts[0]).prefix_steps == 57);

  PromptSpec beat = parse_prompt("beat:width=4,file=beats.txt");
  CHECK(std::get<BeatSpec>(beat.parts[0]).width_steps == 4);
  CHECK(std::get<BeatSpec>(beat.parts[0]).beat_file == "beats.txt");
  // Unresolved beat file cannot build a mask.
  CHECK_THROWS_AS(build_prompt_mask(beat, 8, 4), ArgumentError);

  PromptSpec beat_inline = parse_prompt("beat:width=2,steps=0;5;9");
  CHECK(build_prompt_mask(beat_inline, 12, 2) == beat_mask(12, 2, {0, 5, 9}, 2));

  CHECK_THROWS_AS(parse_prompt(""), ArgumentError);
  CHECK_THROWS_AS(parse_prompt("wobble:x=1"), ArgumentError);
  CHECK_THROWS_AS(parse_prompt("periodic:Q=4"), ArgumentError);
  CHECK_THROWS_AS(parse_prompt("periodic:P=notanumber"), ArgumentError);
}
