#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "vamp/errors.hpp"
#include "vamp/eval.hpp"
#include "vamp/synth.hpp"

using namespace vamp;

namespace {

Signal noise_signal(int32_t sample_rate, int64_t len, uint64_t seed, double amp = 0.5) {
  Signal x;
  x.sample_rate = sample_rate;
  x.samples.resize(size_t(len));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  for (auto& s : x.samples) s = float(u(rng));
  return x;
}

Signal sine_signal(int32_t sample_rate, int64_t len, double freq, double amp = 0.5) {
  Signal x;
  x.sample_rate = sample_rate;
  x.samples.resize(size_t(len));
  for (int64_t i = 0; i < len; ++i) {
    x.samples[size_t(i)] = float(amp * std::sin(2.0 * std::numbers::pi * freq * i / sample_rate));
  }
  return x;
}

}  // namespace

TEST_CASE("log_mel of silence sits at the floor") {
  Signal x;
  x.sample_rate = 8000;
  x.samples.assign(2048, 0.0f);
  Eigen::MatrixXd mel = log_mel(x, 512, 40, 128, 1e-5);
  for (Eigen::Index i = 0; i < mel.rows(); ++i) {
    for (Eigen::Index j = 0; j < mel.cols(); ++j) {
      CHECK(mel(i, j) == std::log(1e-5));
    }
  }
}

TEST_CASE("log_mel matches a direct DFT oracle on a sine") {
  const int32_t sr = 8000, fft = 512, bins = 40;
  const double freq = 1000.0;
  Signal x = sine_signal(sr, 2048, freq);
  Eigen::MatrixXd mel = log_mel(x, fft, bins, 128, 1e-5);

  // Oracle: evaluate the windowed DFT of frame 0 directly, band it with an
  // independently built triangular filterbank, and compare.
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> mag(size_t(fft / 2 + 1));
  for (int32_t k = 0; k <= fft / 2; ++k) {
    double re = 0, im = 0;
    for (int32_t i = 0; i < fft; ++i) {
      double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / fft);
      double v = double(x.samples[size_t(i)]) * w;
      double ang = -2.0 * std::numbers::pi * k * i / fft;
      re += v * std::cos(ang);
      im += v * std::sin(ang);
    }
    mag[size_t(k)] = std::hypot(re, im);
  }
  double mel_hi = hz_to_mel(sr / 2.0);
  int32_t dominant_band = -1;
  double best = -1e300;
  for (int32_t m = 0; m < bins; ++m) {
    double lo = mel_to_hz(mel_hi * m / double(bins + 1));
    double mid = mel_to_hz(mel_hi * (m + 1) / double(bins + 1));
    double hi = mel_to_hz(mel_hi * (m + 2) / double(bins + 1));
    double acc = 0;
    for (int32_t k = 0; k <= fft / 2; ++k) {
      double f = double(k) * sr / fft;
      if (f > lo && f < mid) {
        acc += (f - lo) / (mid - lo) * mag[size_t(k)];
      } else if (f >= mid && f < hi) {
        acc += (hi - f) / (hi - mid) * mag[size_t(k)];
      }
    }
    double value = std::log(std::max(acc, 1e-5));
    CHECK(mel(0, m) == doctest::Approx(value).epsilon(1e-9));
    if (value > best) {
      best = value;
      dominant_band = m;
    }
  }
  // The band whose range covers the sine dominates the frame row.
  Eigen::Index argmax = 0;
  mel.row(0).maxCoeff(&argmax);
  CHECK(int32_t(argmax) == dominant_band);
  double band_lo = mel_to_hz(mel_hi * argmax / double(bins + 1));
  double band_hi = mel_to_hz(mel_hi * double(argmax + 2) / double(bins + 1));
  CHECK(freq > band_lo);
  CHECK(freq < band_hi);
}

TEST_CASE("log_mel doubles to a ln 2 shift above the floor") {
  Signal x = noise_signal(8000, 2048, 3);
  Signal x2 = x;
  for (auto& v : x2.samples) v *= 2.0f;
  Eigen::MatrixXd a = log_mel(x, 512, 40, 128, 1e-5);
  Eigen::MatrixXd b = log_mel(x2, 512, 40, 128, 1e-5);
  REQUIRE(a.minCoeff() > std::log(1e-5));  // no banded value at the floor
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      CHECK(b(i, j) - a(i, j) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
  }
}

TEST_CASE("log_mel argument errors") {
  Signal x = noise_signal(8000, 300, 4);
  CHECK_THROWS_AS(log_mel(x, 512, 40, 128), ArgumentError);   // too short
  CHECK_THROWS_AS(log_mel(x, 300, 40, 75), ArgumentError);    // not a power of two
}

TEST_CASE("multiscale mel error is a pseudometric") {
  MelConfig cfg;
  cfg.scales = {{512, 40}, {256, 20}};
  Signal x = noise_signal(8000, 4096, 5);
  Signal y = noise_signal(8000, 4096, 6);
  CHECK(multiscale_mel_error(x, x, cfg) == 0.0);
  CHECK(multiscale_mel_error(x, y, cfg) == doctest::Approx(multiscale_mel_error(y, x, cfg)));
  CHECK(multiscale_mel_error(x, y, cfg) > 0.0);

  Signal wrong_rate = noise_signal(4000, 4096, 7);
  CHECK_THROWS_AS(multiscale_mel_error(x, wrong_rate, cfg), ArgumentError);
}

TEST_CASE("multiscale mel error closed form under amplitude doubling") {
  MelConfig cfg;
  cfg.scales = {{512, 40}, {256, 20}};
  Signal x = noise_signal(8000, 4096, 8);
  Signal x2 = x;
  for (auto& v : x2.samples) v *= 2.0f;
  double expected = 0;
  for (const auto& s : cfg.scales) {
    int64_t frames = 1 + (x.length() - s.fft_size) / s.hop();
    expected += double(frames) * s.mel_bins * std::log(2.0);
  }
  CHECK(multiscale_mel_error(x, x2, cfg) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("frechet closed forms") {
  SUBCASE("identical gaussians") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 1);
    std::vector<Eigen::VectorXd> rows;
    for (int i = 0; i < 24; ++i) {
      Eigen::VectorXd v(6);
      for (int j = 0; j < 6; ++j) v(j) = n(rng);
      rows.push_back(v);
    }
    GaussianStats s = fit_gaussian(rows);
    CHECK(frechet(s, s) == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(std::abs(frechet(s, s)) < 1e-8);
  }
  SUBCASE("one dimensional") {
    GaussianStats a, b;
    a.mean = Eigen::VectorXd::Constant(1, 1.5);
    b.mean = Eigen::VectorXd::Constant(1, -0.75);
    a.cov = Eigen::MatrixXd::Constant(1, 1, 2.25);  // sigma 1.5
    b.cov = Eigen::MatrixXd::Constant(1, 1, 0.49);  // sigma 0.7
    double expected = (1.5 + 0.75) * (1.5 + 0.75) + (1.5 - 0.7) * (1.5 - 0.7);
    CHECK(frechet(a, b) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(std::abs(frechet(a, b) - expected) < 1e-10);
  }
  SUBCASE("equal covariances cancel") {
    GaussianStats a, b;
    a.mean = Eigen::VectorXd::Zero(2);
    b.mean = Eigen::VectorXd(2);
    b.mean << 3.0, 4.0;
    a.cov = Eigen::MatrixXd::Identity(2, 2);
    b.cov = Eigen::MatrixXd::Identity(2, 2);
    CHECK(frechet(a, b) == doctest::Approx(25.0).epsilon(1e-8));
    CHECK(std::abs(frechet(a, b) - 25.0) < 1e-8);
  }
}

TEST_CASE("frechet is invariant under joint rotation") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0, 1);
  const int dim = 5;
  auto random_stats = [&](double shift) {
    std::vector<Eigen::VectorXd> rows;
    for (int i = 0; i < 40; ++i) {
      Eigen::VectorXd v(dim);
      for (int j = 0; j < dim; ++j) v(j) = n(rng) + shift * j;
      rows.push_back(v);
    }
    return fit_gaussian(rows);
  };
  GaussianStats a = random_stats(0.0);
  GaussianStats b = random_stats(0.3);
  double base = frechet(a, b);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) m(i, j) = n(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    GaussianStats ra{q * a.mean, q * a.cov * q.transpose()};
    GaussianStats rb{q * b.mean, q * b.cov * q.transpose()};
    CHECK(frechet(ra, rb) == doctest::Approx(base).epsilon(1e-6));
  }
}

TEST_CASE("frechet rejects non-PSD covariance") {
  GaussianStats a, b;
  a.mean = Eigen::VectorXd::Zero(2);
  b.mean = Eigen::VectorXd::Zero(2);
  a.cov = Eigen::MatrixXd::Identity(2, 2);
  b.cov = Eigen::MatrixXd::Identity(2, 2);
  b.cov(0, 0) = -1.0;
  CHECK_THROWS_AS(frechet(a, b), NumericError);
}

TEST_CASE("embedding of silence and determinism") {
  Signal x;
  x.sample_rate = 8000;
  x.samples.assign(4096, 0.0f);
  Eigen::VectorXd e = embed(x);
  REQUIRE(e.size() == 160);
  for (int i = 0; i < 80; ++i) {
    CHECK(e(i) == doctest::Approx(std::log(1e-5)).epsilon(1e-12));
    CHECK(std::abs(e(80 + i)) < 1e-12);
  }
  Signal y = noise_signal(8000, 4096, 11);
  CHECK(embed(y).isApprox(embed(y), 0.0));  // bit-for-bit determinism
}

TEST_CASE("distinct synthesis presets separate under the frechet metric") {
  SynthPreset a;
  a.name = "soft";
  a.scale_degrees = {0, 4, 7};
  a.harmonics = 2;
  a.click_gain = 0.1;
  a.decay_s = 0.8;
  a.base_freq = 98.0;
  SynthPreset b;
  b.name = "bright";
  b.scale_degrees = {0, 3, 5, 10};
  b.harmonics = 6;
  b.click_gain = 0.6;
  b.decay_s = 0.25;
  b.base_freq = 147.0;

  auto embeddings = [&](const SynthPreset& preset, uint64_t base_seed, double tempo) {
    std::vector<Eigen::VectorXd> rows;
    for (int i = 0; i < 8; ++i) {
      ClipSpec spec;
      spec.seed = base_seed + uint64_t(i);
      spec.tempo_bpm = tempo + 2.0 * i;
      spec.duration_s = 1.0;
      spec.preset = preset;
      rows.push_back(embed(generate_clip(spec).audio));
    }
    return rows;
  };
  auto rows_a1 = embeddings(a, 100, 100.0);
  auto rows_a2 = embeddings(a, 200, 104.0);
  auto rows_b = embeddings(b, 300, 128.0);

  double within = frechet(fit_gaussian(rows_a1), fit_gaussian(rows_a2));
  auto rows_a = rows_a1;
  rows_a.insert(rows_a.end(), rows_a2.begin(), rows_a2.end());
  double across = frechet(fit_gaussian(rows_a), fit_gaussian(rows_b));
  CHECK(across > within);
}

TEST_CASE("noisy baseline replaces the requested fraction") {
  TokenGrid g = TokenGrid::uniform(16, 4, 64);
  std::mt19937_64 fill(13);
  for (auto& tok : g.data) tok = uint16_t(fill() % 64);

  SUBCASE("r = 0 is the identity") {
    std::mt19937_64 rng(1);
    CHECK(noisy_baseline(g, 0.0, rng) == g);
  }
  SUBCASE("r = 1 resamples every position") {
    std::mt19937_64 rng(2);
    TokenGrid noisy = noisy_baseline(g, 1.0, rng);
    int changed = 0;
    for (size_t i = 0; i < g.data.size(); ++i) changed += noisy.data[i] != g.data[i];
    CHECK(changed > int(0.9 * double(g.size())));  // coincidences ~1/64
  }
  SUBCASE("seeded determinism") {
    std::mt19937_64 r1(3), r2(3);
    CHECK(noisy_baseline(g, 0.4, r1) == noisy_baseline(g, 0.4, r2));
  }
  SUBCASE("domain check") {
    std::mt19937_64 rng(4);
    CHECK_THROWS_AS(noisy_baseline(g, 1.5, rng), ArgumentError);
  }
}

TEST_CASE("noisy decode error grows with the noise ratio") {
  ClipSpec spec;
  spec.seed = 42;
  spec.preset = make_artist_preset(1);
  spec.duration_s = 2.0;
  Clip clip = generate_clip(spec);
  auto frames = extract_frames(clip.audio, 256, 128);
  RvqFitParams params;
  params.stages = 4;
  params.entries = 32;
  params.kmeans_iters = 6;
  RvqCodec codec = fit_rvq(frames, params);
  TokenGrid g = encode(codec, clip.audio);
  Signal reference = decode(codec, g);

  MelConfig mel;
  mel.scales = {{512, 40}};
  std::vector<double> mean_err;
  for (double r : {0.0, 0.3, 0.7, 1.0}) {
    double sum = 0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(seed);
      Signal noisy = decode(codec, noisy_baseline(g, r, rng));
      sum += multiscale_mel_error(reference, noisy, mel);
    }
    mean_err.push_back(sum / 5.0);
  }
  CHECK(mean_err[0] == 0.0);
  for (size_t i = 1; i < mean_err.size(); ++i) CHECK(mean_err[i] > mean_err[i - 1] * 0.999);
}
