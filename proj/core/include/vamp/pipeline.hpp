#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vamp/model.hpp"
#include "vamp/prompts.hpp"
#include "vamp/sampler.hpp"
#include "vamp/tokens.hpp"

namespace vamp {

struct TrainConfig {
  int32_t steps = 2000;
  int32_t batch = 16;
  double lr = 3e-3;          // target rate, reached at the end of warmup
  int32_t warmup = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double dropout = 0.0;
  double clip_norm = 1.0;    // global gradient-norm clip; <= 0 disables
  uint64_t seed = 0;
  int32_t eval_every = 100;  // validation cadence when a val corpus is given
  int32_t threads = 0;       // 0 = hardware concurrency

  // Full-scale settings kept for reference; not exercised by the test suite.
  static TrainConfig full_scale() {
    TrainConfig cfg;
    cfg.steps = 1'000'000;
    cfg.batch = 25;
    cfg.lr = 1e-3;
    cfg.warmup = 10'000;
    cfg.dropout = 0.1;
    return cfg;
  }
};

// Inverse-square-root schedule with linear warmup: lr(s) = target * s/warmup
// for s <= warmup, then target * sqrt(warmup/s).
double learning_rate_at(const TrainConfig& cfg, int32_t step);

struct TrainHistoryEntry {
  int32_t step = 0;
  double loss = 0;
  double lr = 0;
  double masked_fraction_mean = 0;
};

struct TrainResult {
  std::vector<float> params;
  std::vector<TrainHistoryEntry> history;           // one entry per step
  std::vector<std::pair<int32_t, double>> val_history;  // (step, val loss)
};

// Masked-token training: per step, sample a batch of grids (random crops when
// longer than cfg.max_timesteps), draw a role-appropriate variable-ratio
// training mask per example, and apply a decoupled-weight-decay
// adaptive-moment update of the mean-reduced masked cross entropy.
// Deterministic given train_cfg.seed, independent of thread count.
// Corpus grids must match the model role (coarse: T x Nc slices; c2f: full).
TrainResult train(const ModelConfig& model_cfg, const std::vector<TokenGrid>& corpus,
                  const TrainConfig& train_cfg,
                  const std::vector<TokenGrid>& val_corpus = {});

void write_history_csv(const TrainResult& result, const std::string& path);

struct GenerationRequest {
  TokenGrid input;        // full hierarchy (Nc + Nf levels)
  PromptSpec prompt;      // beat parts must be resolved
  SamplerConfig coarse;
  SamplerConfig c2f;
};

struct GenerationResult {
  TokenGrid tokens;
  int32_t coarse_passes = 0;
  int32_t c2f_passes = 0;
  DecodeTrace coarse_trace;
  DecodeTrace c2f_trace;
  int32_t total_passes() const { return coarse_passes + c2f_passes; }
};

// Two-stage generation: the coarse model decodes the coarse sub-grid under
// the prompt's coarse columns, then the coarse-to-fine model decodes the fine
// columns with the stage-1 coarse tokens fixed. Prompt-unmasked positions are
// preserved exactly across both stages.
GenerationResult generate(const ModelConfig& coarse_cfg, const std::vector<float>& coarse_params,
                          const ModelConfig& c2f_cfg, const std::vector<float>& c2f_params,
                          const GenerationRequest& req);

// Forward passes an autoregressive model would need for the same audio
// duration: one per latent timestep.
int64_t autoregressive_passes(double duration_s, double token_rate);

// Checkpoint file: magic "VMPW", version u8 = 1, the ModelConfig field list
// (little-endian), the flat parameter view as 32-bit floats, then a CRC-32 of
// everything after the version byte. Checksum mismatch -> CorruptionError;
// unknown version -> UnsupportedVersionError.
struct Checkpoint {
  ModelConfig config;
  std::vector<float> params;
};
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
size_t write_checkpoint(const Checkpoint& ckpt, std::ostream& sink);
Checkpoint read_checkpoint(std::istream& source);

}  // namespace vamp
