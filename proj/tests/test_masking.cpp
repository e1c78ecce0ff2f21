#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "vamp/errors.hpp"
#include "vamp/masking.hpp"

using namespace vamp;

TEST_CASE("gamma endpoints and midpoint") {
  CHECK(schedule_gamma(0.0) == 1.0);
  CHECK(schedule_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(schedule_gamma(0.5) == doctest::Approx(std::cos(std::numbers::pi / 4)).epsilon(1e-12));
  CHECK_THROWS_AS(schedule_gamma(-0.01), ArgumentError);
  CHECK_THROWS_AS(schedule_gamma(1.01), ArgumentError);
}

TEST_CASE("gamma is monotone non-increasing") {
  double prev = schedule_gamma(0.0);
  for (int i = 1; i <= 100; ++i) {
    double cur = schedule_gamma(i / 100.0);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("num_to_mask endpoints and rounding") {
  CHECK(num_to_mask(8, 8, 100) == 0);
  CHECK(num_to_mask(0, 8, 100) == 100);
  CHECK(num_to_mask(1, 2, 100) == 71);  // round(70.71...)
  CHECK_THROWS_AS(num_to_mask(-1, 8, 100), ArgumentError);
  CHECK_THROWS_AS(num_to_mask(9, 8, 100), ArgumentError);
  CHECK_THROWS_AS(num_to_mask(1, 8, -1), ArgumentError);
}

TEST_CASE("num_to_mask is non-increasing in t") {
  for (int64_t t_total : {1, 4, 12, 36}) {
    for (int64_t d : {0, 1, 7, 100, 9999}) {
      int64_t prev = num_to_mask(0, t_total, d);
      for (int64_t t = 1; t <= t_total; ++t) {
        int64_t cur = num_to_mask(t, t_total, d);
        CHECK(cur <= prev);
        CHECK(cur >= 0);
        prev = cur;
      }
      CHECK(num_to_mask(t_total, t_total, d) == 0);
    }
  }
}

TEST_CASE("training mask is deterministic and count matches the drawn ratio") {
  std::mt19937_64 a(123), b(123);
  MaskGrid ma = sample_training_mask(9, 5, a);
  MaskGrid mb = sample_training_mask(9, 5, b);
  CHECK(ma == mb);

  // Reproduce the ratio draw from an identical stream.
  std::mt19937_64 c(123);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(c);
  int64_t expected = int64_t(std::ceil(schedule_gamma(u) * 45.0));
  CHECK(masked_count(ma) == expected);
  CHECK(masked_count(ma) >= 0);
  CHECK(masked_count(ma) <= 45);
}

TEST_CASE("training mask mean fraction matches the schedule integral") {
  // E[schedule_gamma(u)] over u ~ U[0,1) is 2/pi.
  std::mt19937_64 rng(2024);
  double sum = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    MaskGrid m = sample_training_mask(20, 10, rng);
    sum += double(masked_count(m)) / double(m.size());
  }
  double mean = sum / draws;
  CHECK(mean == doctest::Approx(2.0 / std::numbers::pi).epsilon(0.02));
  CHECK(std::abs(mean - 2.0 / std::numbers::pi) < 0.01);
}

TEST_CASE("training mask positions are uniform given the count") {
  // Chi-squared over position frequencies; threshold is the 0.999 quantile
  // for df = 11 (4x3 grid).
  std::mt19937_64 rng(7);
  const int draws = 10000;
  std::vector<int64_t> hits(12, 0);
  int64_t total = 0;
  for (int i = 0; i < draws; ++i) {
    MaskGrid m = sample_training_mask(4, 3, rng);
    for (size_t j = 0; j < m.data.size(); ++j) {
      if (m.data[j]) {
        hits[j] += 1;
        total += 1;
      }
    }
  }
  double expected = double(total) / 12.0;
  double chi2 = 0;
  for (int64_t h : hits) {
    double d = double(h) - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 31.264);  // p > 0.001
}

TEST_CASE("c2f training mask never touches coarse columns") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 50; ++iter) {
    MaskGrid m = sample_c2f_training_mask(12, 2, 4, rng);
    CHECK(m.levels == 6);
    for (int32_t t = 0; t < 12; ++t) {
      CHECK_FALSE(m.at(t, 0));
      CHECK_FALSE(m.at(t, 1));
    }
    CHECK(masked_count(m) <= 12 * 4);
  }
}

TEST_CASE("c2f training mask with no fine levels is empty") {
  std::mt19937_64 rng(5);
  MaskGrid m = sample_c2f_training_mask(6, 3, 0, rng);
  CHECK(masked_count(m) == 0);
}
