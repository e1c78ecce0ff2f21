#include "vamp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "vamp/errors.hpp"

namespace vamp {

namespace {

bool is_pow2(int32_t v) { return v > 0 && (v & (v - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place.
void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / double(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (size_t j = 0; j < len / 2; ++j) {
        auto u = a[i + j];
        auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filterbank over FFT bins 0..fft/2, peak 1 per band.
Eigen::MatrixXd mel_filterbank(int32_t fft_size, int32_t mel_bins, int32_t sample_rate) {
  const int32_t bins = fft_size / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(mel_bins, bins);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(size_t(mel_bins) + 2);
  for (int32_t j = 0; j < mel_bins + 2; ++j) {
    edges[size_t(j)] = mel_to_hz(mel_hi * j / double(mel_bins + 1));
  }
  for (int32_t m = 0; m < mel_bins; ++m) {
    double lo = edges[size_t(m)], mid = edges[size_t(m) + 1], hi = edges[size_t(m) + 2];
    for (int32_t k = 0; k < bins; ++k) {
      double f = double(k) * sample_rate / fft_size;
      if (f > lo && f < mid) {
        fb(m, k) = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        fb(m, k) = (hi - f) / (hi - mid);
      }
    }
  }
  return fb;
}

}  // namespace

Eigen::MatrixXd log_mel(const Signal& x, int32_t fft_size, int32_t mel_bins,
                        int32_t hop, double log_floor) {
  if (x.sample_rate <= 0) throw ArgumentError("signal sample rate must be > 0");
  if (!is_pow2(fft_size)) throw ArgumentError("fft size must be a power of two");
  if (mel_bins < 1 || hop < 1) throw ArgumentError("bad mel parameters");
  if (x.length() < fft_size) throw ArgumentError("signal shorter than one analysis frame");
  for (float v : x.samples) {
    if (!std::isfinite(v)) throw ArgumentError("signal contains non-finite samples");
  }

  std::vector<double> window(static_cast<size_t>(fft_size));
  for (int32_t k = 0; k < fft_size; ++k) {
    window[size_t(k)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / fft_size);
  }
  const Eigen::MatrixXd fb = mel_filterbank(fft_size, mel_bins, x.sample_rate);
  const int32_t bins = fft_size / 2 + 1;
  const int64_t frames = 1 + (x.length() - fft_size) / hop;

  Eigen::MatrixXd out(frames, mel_bins);
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
  Eigen::VectorXd mag(bins);
  for (int64_t fr = 0; fr < frames; ++fr) {
    const float* src = x.samples.data() + fr * hop;
    for (int32_t k = 0; k < fft_size; ++k) {
      buf[size_t(k)] = {double(src[k]) * window[size_t(k)], 0.0};
    }
    fft(buf);
    for (int32_t k = 0; k < bins; ++k) mag(k) = std::abs(buf[size_t(k)]);
    Eigen::VectorXd banded = fb * mag;
    for (int32_t m = 0; m < mel_bins; ++m) {
      out(fr, m) = std::log(std::max(banded(m), log_floor));
    }
  }
  return out;
}

double multiscale_mel_error(const Signal& a, const Signal& b, const MelConfig& cfg) {
  if (a.sample_rate != b.sample_rate) throw ArgumentError("sample rates differ");
  if (a.length() != b.length()) throw ArgumentError("signal lengths differ");
  double total = 0;
  for (const auto& scale : cfg.scales) {
    Eigen::MatrixXd sa = log_mel(a, scale.fft_size, scale.mel_bins, scale.hop(), cfg.log_floor);
    Eigen::MatrixXd sb = log_mel(b, scale.fft_size, scale.mel_bins, scale.hop(), cfg.log_floor);
    total += (sa - sb).cwiseAbs().sum();
  }
  return total;
}

GaussianStats fit_gaussian(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.size() < 2) throw ArgumentError("gaussian fit needs at least 2 samples");
  const Eigen::Index dim = rows.front().size();
  GaussianStats stats;
  stats.mean = Eigen::VectorXd::Zero(dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw ArgumentError("embedding dimensions differ");
    stats.mean += r;
  }
  stats.mean /= double(rows.size());
  stats.cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& r : rows) {
    Eigen::VectorXd d = r - stats.mean;
    stats.cov += d * d.transpose();
  }
  stats.cov /= double(rows.size() - 1);
  return stats;
}

namespace {

// PSD square root via symmetric eigendecomposition; clips tiny negatives.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s, const char* what) {
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
    throw NumericError(std::string(what) + " covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double tol = 1e-8 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -tol) throw NumericError(std::string(what) + " covariance is not PSD");
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) throw ArgumentError("gaussian dimensions differ");
  if (a.cov.rows() != a.mean.size() || b.cov.rows() != b.mean.size()) {
    throw ArgumentError("covariance shape does not match mean");
  }
  const Eigen::MatrixXd sqrt_a = psd_sqrt(a.cov, "first");
  // tr((Sa Sb)^{1/2}) through the symmetric product sqrt(Sa) Sb sqrt(Sa).
  Eigen::MatrixXd prod = sqrt_a * b.cov * sqrt_a;
  prod = 0.5 * (prod + prod.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prod);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  double tr_sqrt = 0;
  const double tol = 1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double lam = es.eigenvalues()(i);
    if (lam < -tol) throw NumericError("product covariance is not PSD");
    tr_sqrt += std::sqrt(std::max(lam, 0.0));
  }
  double dist = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(dist, 0.0);
}

Eigen::VectorXd embed(const Signal& x, double log_floor) {
  const Eigen::MatrixXd mel = log_mel(x, 512, 80, 128, log_floor);
  const Eigen::Index bands = mel.cols();
  Eigen::VectorXd out(2 * bands);
  for (Eigen::Index m = 0; m < bands; ++m) {
    double mean = mel.col(m).mean();
    double var = (mel.col(m).array() - mean).square().mean();
    out(m) = mean;
    out(bands + m) = std::sqrt(var);
  }
  return out;
}

TokenGrid noisy_baseline(const TokenGrid& g, double r, std::mt19937_64& rng) {
  if (!(r >= 0.0 && r <= 1.0)) throw ArgumentError("noise ratio must lie in [0,1]");
  g.validate();
  TokenGrid out = g;
  const int64_t total = g.size();
  const int64_t count = int64_t(std::ceil(r * double(total)));
  std::vector<int64_t> pool(static_cast<size_t>(total));
  std::iota(pool.begin(), pool.end(), 0);
  for (int64_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<int64_t> pick(i, total - 1);
    std::swap(pool[size_t(i)], pool[size_t(pick(rng))]);
    int64_t flat = pool[size_t(i)];
    int32_t level = int32_t(flat % g.levels);
    std::uniform_int_distribution<int32_t> tok(0, int32_t(g.vocab_sizes[size_t(level)]) - 1);
    out.data[size_t(flat)] = uint16_t(tok(rng));
  }
  return out;
}

}  // namespace vamp
