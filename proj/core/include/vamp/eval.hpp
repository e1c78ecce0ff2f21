#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "vamp/tokenizer.hpp"
#include "vamp/tokens.hpp"

namespace vamp {

struct MelScale {
  int32_t fft_size = 2048;  // power of two
  int32_t mel_bins = 150;
  int32_t hop() const { return fft_size / 4; }
};

struct MelConfig {
  std::vector<MelScale> scales = {{2048, 150}, {512, 80}};
  double log_floor = 1e-5;
};

// Hann-windowed magnitude spectrogram through a triangular mel filterbank
// (area-unnormalized, mel(f) = 2595*log10(1 + f/700), bands spanning
// 0..sample_rate/2), then natural log with the configured floor.
// Rows = frames, cols = mel bins.
Eigen::MatrixXd log_mel(const Signal& x, int32_t fft_size, int32_t mel_bins,
                        int32_t hop, double log_floor = 1e-5);

// Sum over scales of the entrywise L1 distance between log-mel matrices.
double multiscale_mel_error(const Signal& a, const Signal& b,
                            const MelConfig& cfg = {});

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric PSD
};

// Sample mean and covariance (ddof = 1) of row vectors. Needs >= 2 rows.
GaussianStats fit_gaussian(const std::vector<Eigen::VectorXd>& rows);

// Squared Frechet distance between Gaussians:
// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}), with the matrix square
// root taken through the symmetrized product sqrt(Sa)^T Sb sqrt(Sa); tiny
// negative eigenvalues are clipped at zero, larger ones raise NumericError.
double frechet(const GaussianStats& a, const GaussianStats& b);

// Deterministic proxy clip embedding: per-band mean and standard deviation of
// the 512-point / 80-band log-mel matrix (160 dimensions).
Eigen::VectorXd embed(const Signal& x, double log_floor = 1e-5);

// Replaces ceil(r * T * N) positions, chosen uniformly without replacement,
// with uniform random tokens from their level vocabularies.
TokenGrid noisy_baseline(const TokenGrid& g, double r, std::mt19937_64& rng);

}  // namespace vamp
