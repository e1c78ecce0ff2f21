#include "vamp/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "vamp/errors.hpp"

namespace vamp {

double schedule_gamma(double r) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ArgumentError("gamma argument must lie in [0,1]");
  }
  return std::cos(std::numbers::pi * r / 2.0);
}

namespace {

// Round to nearest, ties to even, for non-negative inputs.
int64_t round_half_even(double v) {
  double fl = std::floor(v);
  double frac = v - fl;
  int64_t base = int64_t(fl);
  if (frac > 0.5) return base + 1;
  if (frac < 0.5) return base;
  return (base % 2 == 0) ? base : base + 1;
}

// Fills `grid` with `count` masked positions drawn uniformly without
// replacement from `pool` (indices into the grid's flat storage).
void scatter_mask(MaskGrid& grid, std::vector<int64_t>& pool, int64_t count,
                  std::mt19937_64& rng) {
  const int64_t n = int64_t(pool.size());
  for (int64_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<int64_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
    grid.data[size_t(pool[i])] = 1;
  }
}

}  // namespace

int64_t num_to_mask(int64_t t, int64_t t_total, int64_t d_total) {
  if (t_total < 1) throw ArgumentError("num_to_mask needs t_total >= 1");
  if (d_total < 0) throw ArgumentError("num_to_mask needs d_total >= 0");
  if (t < 0 || t > t_total) throw ArgumentError("num_to_mask needs 0 <= t <= t_total");
  double frac = schedule_gamma(double(t) / double(t_total));
  int64_t k = round_half_even(frac * double(d_total));
  return std::clamp(k, int64_t(0), d_total);
}

MaskGrid sample_training_mask(int32_t t, int32_t n, std::mt19937_64& rng) {
  if (t < 1 || n < 1) throw ArgumentError("training mask needs T >= 1 and N >= 1");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u = uniform(rng);
  int64_t total = int64_t(t) * n;
  int64_t count = std::min<int64_t>(total, int64_t(std::ceil(schedule_gamma(u) * double(total))));
  MaskGrid m(t, n);
  std::vector<int64_t> pool(static_cast<size_t>(total));
  std::iota(pool.begin(), pool.end(), 0);
  scatter_mask(m, pool, count, rng);
  return m;
}

MaskGrid sample_c2f_training_mask(int32_t t, int32_t n_coarse, int32_t n_fine,
                                  std::mt19937_64& rng) {
  if (t < 1 || n_coarse < 0 || n_fine < 0 || n_coarse + n_fine < 1) {
    throw ArgumentError("c2f training mask needs T >= 1 and at least one level");
  }
  MaskGrid m(t, n_coarse + n_fine);
  if (n_fine == 0) return m;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u = uniform(rng);
  int64_t total = int64_t(t) * n_fine;
  int64_t count = std::min<int64_t>(total, int64_t(std::ceil(schedule_gamma(u) * double(total))));
  // Pool holds flat indices of the fine columns only.
  std::vector<int64_t> pool;
  pool.reserve(size_t(total));
  for (int32_t ts = 0; ts < t; ++ts) {
    for (int32_t lvl = n_coarse; lvl < n_coarse + n_fine; ++lvl) {
      pool.push_back(int64_t(ts) * (n_coarse + n_fine) + lvl);
    }
  }
  scatter_mask(m, pool, count, rng);
  return m;
}

}  // namespace vamp
