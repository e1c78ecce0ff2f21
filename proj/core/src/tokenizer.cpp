#include "vamp/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "binary_io.hpp"
#include "vamp/errors.hpp"

namespace vamp {

namespace {
constexpr char kCodecMagic[5] = "VMPC";
constexpr uint8_t kVersion = 1;

void check_finite(const Signal& x) {
  if (x.sample_rate <= 0) throw ArgumentError("signal sample rate must be > 0");
  for (float v : x.samples) {
    if (!std::isfinite(v)) throw ArgumentError("signal contains non-finite samples");
  }
}

double sq_dist(const float* a, const float* b, int32_t d) {
  double s = 0;
  for (int32_t i = 0; i < d; ++i) {
    double diff = double(a[i]) - double(b[i]);
    s += diff * diff;
  }
  return s;
}

double sq_norm(const float* a, int32_t d) {
  double s = 0;
  for (int32_t i = 0; i < d; ++i) s += double(a[i]) * a[i];
  return s;
}

// Nearest centroid per point via |x-c|^2 = |x|^2 - 2 x.c + |c|^2, with the
// centroid matrix transposed so the inner accumulation vectorizes.
void assign_nearest(const std::vector<std::vector<float>>& points, const float* centroids,
                    int32_t k, int32_t d, std::vector<int32_t>& assign,
                    std::vector<double>& dist) {
  const int64_t n = int64_t(points.size());
  std::vector<double> ct(size_t(d) * k);
  std::vector<double> cnorm(size_t(k), 0.0);
  for (int32_t c = 0; c < k; ++c) {
    for (int32_t j = 0; j < d; ++j) {
      double v = centroids[size_t(c) * d + j];
      ct[size_t(j) * k + c] = v;
      cnorm[size_t(c)] += v * v;
    }
  }
  assign.resize(size_t(n));
  dist.resize(size_t(n));
  std::vector<double> dots(static_cast<size_t>(k));
  for (int64_t i = 0; i < n; ++i) {
    const float* p = points[size_t(i)].data();
    std::fill(dots.begin(), dots.end(), 0.0);
    for (int32_t j = 0; j < d; ++j) {
      double a = p[j];
      const double* crow = ct.data() + size_t(j) * k;
      for (int32_t c = 0; c < k; ++c) dots[size_t(c)] += a * crow[c];
    }
    double best = std::numeric_limits<double>::max();
    int32_t best_c = 0;
    for (int32_t c = 0; c < k; ++c) {
      double v = cnorm[size_t(c)] - 2.0 * dots[size_t(c)];
      if (v < best) {
        best = v;
        best_c = c;
      }
    }
    assign[size_t(i)] = best_c;
    dist[size_t(i)] = std::max(0.0, best + sq_norm(p, d));
  }
}

// k-means over `points` (rows of dimension d) with k centroids.
// Returns centroids row-major. Lloyd iterations with k-means++ seeding.
std::vector<float> kmeans(const std::vector<std::vector<float>>& points, int32_t k,
                          int32_t d, int32_t iters, std::mt19937_64& rng) {
  const int64_t n = int64_t(points.size());
  std::vector<float> centroids(size_t(k) * d, 0.0f);

  // k-means++ seeding with incrementally maintained distances.
  std::uniform_int_distribution<int64_t> first(0, n - 1);
  std::copy_n(points[size_t(first(rng))].data(), d, centroids.begin());
  std::vector<double> best_d2(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    best_d2[size_t(i)] = sq_dist(points[size_t(i)].data(), centroids.data(), d);
  }
  for (int32_t c = 1; c < k; ++c) {
    double total = 0;
    for (double v : best_d2) total += v;
    int64_t chosen = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng), acc = 0;
      for (int64_t i = 0; i < n; ++i) {
        acc += best_d2[size_t(i)];
        if (acc >= r) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = first(rng);  // all points coincide with existing centroids
    }
    float* row = centroids.data() + size_t(c) * d;
    std::copy_n(points[size_t(chosen)].data(), d, row);
    for (int64_t i = 0; i < n; ++i) {
      best_d2[size_t(i)] =
          std::min(best_d2[size_t(i)], sq_dist(points[size_t(i)].data(), row, d));
    }
  }

  std::vector<int32_t> assign(size_t(n), 0);
  std::vector<int32_t> next_assign;
  std::vector<double> dist;
  std::vector<double> sums(size_t(k) * d);
  std::vector<int64_t> counts(static_cast<size_t>(k));
  for (int32_t iter = 0; iter < iters; ++iter) {
    assign_nearest(points, centroids.data(), k, d, next_assign, dist);
    bool changed = iter == 0 || next_assign != assign;
    assign.swap(next_assign);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int64_t i = 0; i < n; ++i) {
      int32_t c = assign[size_t(i)];
      counts[size_t(c)] += 1;
      const float* p = points[size_t(i)].data();
      double* s = sums.data() + size_t(c) * d;
      for (int32_t j = 0; j < d; ++j) s[j] += p[j];
    }
    for (int32_t c = 0; c < k; ++c) {
      if (counts[size_t(c)] == 0) {
        // Re-seed an empty cluster from the farthest point.
        int64_t far = int64_t(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(points[size_t(far)].data(), d, centroids.begin() + size_t(c) * d);
        dist[size_t(far)] = 0;
        changed = true;
        continue;
      }
      for (int32_t j = 0; j < d; ++j) {
        centroids[size_t(c) * d + j] = float(sums[size_t(c) * d + j] / counts[size_t(c)]);
      }
    }
    if (!changed && iter > 0) break;
  }
  return centroids;
}

}  // namespace

double RvqCodec::bitrate_bps() const {
  return token_rate() * stages * std::log2(double(entries));
}

void RvqCodec::validate() const {
  if (sample_rate <= 0 || frame_len < 1 || hop < 1) {
    throw ArgumentError("codec framing parameters out of range");
  }
  if (hop > frame_len) throw ArgumentError("codec requires hop <= frame_len");
  if (stages < 1 || entries < 2) throw ArgumentError("codec needs N >= 1 and C >= 2");
  if (dim != frame_len) throw ArgumentError("codec frame feature dimension must equal frame_len");
  if (int32_t(codebooks.size()) != stages) throw ArgumentError("codec stage count mismatch");
  for (int32_t i = 0; i < stages; ++i) {
    const Codebook& cb = codebooks[size_t(i)];
    if (cb.level != i || cb.dim != dim || cb.entry_count() != entries) {
      throw ArgumentError("codebook " + std::to_string(i) + " has inconsistent shape");
    }
    for (int32_t j = 0; j < dim; ++j) {
      if (cb.entries[size_t(j)] != 0.0f) {
        throw ArgumentError("codebook entry 0 must be the zero vector");
      }
    }
    for (float v : cb.entries) {
      if (!std::isfinite(v)) throw ArgumentError("codebook contains non-finite entries");
    }
  }
}

std::vector<float> analysis_window(int32_t frame_len) {
  std::vector<float> w(static_cast<size_t>(frame_len));
  for (int32_t k = 0; k < frame_len; ++k) {
    w[size_t(k)] =
        float(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (k + 0.5) / frame_len));
  }
  return w;
}

std::vector<std::vector<float>> extract_frames(const Signal& x, int32_t frame_len,
                                               int32_t hop) {
  check_finite(x);
  if (frame_len < 1 || hop < 1 || hop > frame_len) {
    throw ArgumentError("bad framing parameters");
  }
  if (x.length() < frame_len) throw ArgumentError("signal shorter than one frame");
  const auto w = analysis_window(frame_len);
  int64_t t_count = 1 + (x.length() - frame_len) / hop;
  std::vector<std::vector<float>> frames(static_cast<size_t>(t_count));
  for (int64_t t = 0; t < t_count; ++t) {
    auto& f = frames[size_t(t)];
    f.resize(size_t(frame_len));
    const float* src = x.samples.data() + t * hop;
    for (int32_t k = 0; k < frame_len; ++k) f[size_t(k)] = src[k] * w[size_t(k)];
  }
  return frames;
}

RvqCodec fit_rvq(const std::vector<std::vector<float>>& training_frames,
                 const RvqFitParams& params) {
  if (training_frames.empty()) throw ArgumentError("fit_rvq needs a non-empty frame set");
  if (params.stages < 1 || params.entries < 2) {
    throw ArgumentError("fit_rvq needs N >= 1 and C >= 2");
  }
  if (int64_t(training_frames.size()) < params.entries) {
    throw ArgumentError("fit_rvq needs at least C training frames");
  }
  const int32_t d = params.frame_len;
  for (const auto& f : training_frames) {
    if (int32_t(f.size()) != d) throw ArgumentError("frame dimension mismatch");
  }

  RvqCodec codec;
  codec.sample_rate = params.sample_rate;
  codec.frame_len = params.frame_len;
  codec.hop = params.hop;
  codec.stages = params.stages;
  codec.entries = params.entries;
  codec.dim = d;

  std::mt19937_64 rng(params.seed);
  std::vector<std::vector<float>> residuals = training_frames;
  for (int32_t stage = 0; stage < params.stages; ++stage) {
    std::vector<float> learned =
        kmeans(residuals, params.entries - 1, d, params.kmeans_iters, rng);
    Codebook cb;
    cb.level = stage;
    cb.dim = d;
    cb.entries.assign(size_t(params.entries) * d, 0.0f);  // entry 0 stays zero
    std::copy(learned.begin(), learned.end(), cb.entries.begin() + d);
    codec.codebooks.push_back(std::move(cb));

    // Recompute residuals with the fitted stage for the next one.
    const Codebook& fitted = codec.codebooks.back();
    std::vector<int32_t> assign;
    std::vector<double> dist;
    assign_nearest(residuals, fitted.entries.data(), params.entries, d, assign, dist);
    for (size_t i = 0; i < residuals.size(); ++i) {
      const float* e = fitted.entry(assign[i]);
      for (int32_t j = 0; j < d; ++j) residuals[i][size_t(j)] -= e[j];
    }
  }
  codec.validate();
  return codec;
}

TokenGrid encode(const RvqCodec& codec, const Signal& x) {
  codec.validate();
  if (x.sample_rate != codec.sample_rate) {
    throw ArgumentError("signal sample rate does not match codec");
  }
  auto frames = extract_frames(x, codec.frame_len, codec.hop);
  TokenGrid g = TokenGrid::uniform(int32_t(frames.size()), codec.stages,
                                   uint16_t(codec.entries));
  std::vector<double> residual(size_t(codec.dim));
  for (size_t t = 0; t < frames.size(); ++t) {
    for (int32_t j = 0; j < codec.dim; ++j) residual[size_t(j)] = frames[t][size_t(j)];
    for (int32_t stage = 0; stage < codec.stages; ++stage) {
      const Codebook& cb = codec.codebooks[size_t(stage)];
      double best = std::numeric_limits<double>::max();
      int32_t best_c = 0;
      for (int32_t c = 0; c < codec.entries; ++c) {
        const float* e = cb.entry(c);
        double d2 = 0;
        for (int32_t j = 0; j < codec.dim; ++j) {
          double diff = residual[size_t(j)] - e[j];
          d2 += diff * diff;
        }
        if (d2 < best) {  // strict: ties keep the lowest index
          best = d2;
          best_c = c;
        }
      }
      g.at(int32_t(t), stage) = uint16_t(best_c);
      const float* e = cb.entry(best_c);
      for (int32_t j = 0; j < codec.dim; ++j) residual[size_t(j)] -= e[j];
    }
  }
  return g;
}

Signal decode(const RvqCodec& codec, const TokenGrid& g) {
  codec.validate();
  g.validate();
  if (g.levels != codec.stages) throw ArgumentError("grid level count does not match codec");
  for (uint16_t c : g.vocab_sizes) {
    if (c != codec.entries) throw ArgumentError("grid vocabulary does not match codec");
  }
  const auto w = analysis_window(codec.frame_len);
  const int64_t out_len = int64_t(g.timesteps - 1) * codec.hop + codec.frame_len;
  std::vector<double> acc(size_t(out_len), 0.0);
  std::vector<double> norm(size_t(out_len), 0.0);
  std::vector<double> frame(size_t(codec.dim));
  for (int32_t t = 0; t < g.timesteps; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int32_t stage = 0; stage < codec.stages; ++stage) {
      const float* e = codec.codebooks[size_t(stage)].entry(g.at(t, stage));
      for (int32_t j = 0; j < codec.dim; ++j) frame[size_t(j)] += e[j];
    }
    int64_t base = int64_t(t) * codec.hop;
    for (int32_t j = 0; j < codec.frame_len; ++j) {
      acc[size_t(base + j)] += w[size_t(j)] * frame[size_t(j)];
      norm[size_t(base + j)] += double(w[size_t(j)]) * w[size_t(j)];
    }
  }
  Signal y;
  y.sample_rate = codec.sample_rate;
  y.samples.resize(size_t(out_len));
  for (int64_t i = 0; i < out_len; ++i) {
    y.samples[size_t(i)] = norm[size_t(i)] > 1e-12 ? float(acc[size_t(i)] / norm[size_t(i)]) : 0.0f;
  }
  return y;
}

size_t write_codec(const RvqCodec& codec, std::ostream& sink) {
  codec.validate();
  detail::Writer w(sink);
  w.magic(kCodecMagic);
  w.u8(kVersion);
  w.u32(uint32_t(codec.sample_rate));
  w.u32(uint32_t(codec.frame_len));
  w.u32(uint32_t(codec.hop));
  w.u8(uint8_t(codec.stages));
  w.u16(uint16_t(codec.entries));
  w.u32(uint32_t(codec.dim));
  for (const auto& cb : codec.codebooks) {
    for (float v : cb.entries) w.f32(v);
  }
  return w.offset();
}

RvqCodec read_codec(std::istream& source) {
  detail::Reader r(source);
  r.expect_magic(kCodecMagic, "codec");
  uint8_t version = r.u8();
  if (version != kVersion) {
    throw FormatError("unsupported codec version " + std::to_string(version));
  }
  RvqCodec codec;
  codec.sample_rate = int32_t(r.u32());
  codec.frame_len = int32_t(r.u32());
  codec.hop = int32_t(r.u32());
  codec.stages = r.u8();
  codec.entries = r.u16();
  codec.dim = int32_t(r.u32());
  if (codec.stages < 1 || codec.entries < 2 || codec.dim < 1) {
    throw FormatError("codec header out of range");
  }
  for (int32_t stage = 0; stage < codec.stages; ++stage) {
    Codebook cb;
    cb.level = stage;
    cb.dim = codec.dim;
    cb.entries.resize(size_t(codec.entries) * codec.dim);
    for (auto& v : cb.entries) v = r.f32();
    codec.codebooks.push_back(std::move(cb));
  }
  codec.validate();
  return codec;
}

void save_codec(const RvqCodec& codec, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  write_codec(codec, f);
}

RvqCodec load_codec(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return read_codec(f);
}

}  // namespace vamp
