#include "vamp/pipeline.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "binary_io.hpp"
#include "vamp/errors.hpp"
#include "vamp/masking.hpp"

namespace vamp {

namespace {

constexpr char kCheckpointMagic[5] = "VMPW";
constexpr uint8_t kVersion = 1;

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct ExampleResult {
  double loss = 0;
  double masked_fraction = 0;
  std::vector<float> grad;
};

}  // namespace

double learning_rate_at(const TrainConfig& cfg, int32_t step) {
  if (step < 1) throw ArgumentError("learning rate defined for steps >= 1");
  if (step <= cfg.warmup) return cfg.lr * double(step) / double(cfg.warmup);
  return cfg.lr * std::sqrt(double(cfg.warmup) / double(step));
}

TrainResult train(const ModelConfig& model_cfg, const std::vector<TokenGrid>& corpus,
                  const TrainConfig& train_cfg, const std::vector<TokenGrid>& val_corpus) {
  model_cfg.validate();
  if (corpus.empty()) throw ArgumentError("training corpus is empty");
  if (train_cfg.steps < 1 || train_cfg.batch < 1 || train_cfg.warmup < 1) {
    throw ArgumentError("train config counts must be positive");
  }
  for (const auto& g : corpus) {
    if (g.levels != model_cfg.n_levels) {
      throw ArgumentError("corpus grid level count does not match model role");
    }
  }

  ParamLayout layout(model_cfg);
  TrainResult result;
  result.params = init_parameters<float>(model_cfg, splitmix64(train_cfg.seed));
  std::vector<float> m(size_t(layout.total), 0.0f), v(size_t(layout.total), 0.0f);

  const int32_t n_threads = train_cfg.threads > 0
                                ? train_cfg.threads
                                : std::max(1u, std::thread::hardware_concurrency());

  // Per-example sub-seeds make the run independent of thread scheduling.
  auto example_seed = [&](int32_t step, int32_t idx) {
    return splitmix64(train_cfg.seed ^ (uint64_t(step) << 20) ^ uint64_t(idx));
  };

  auto run_example = [&](const TokenGrid& full, uint64_t seed, ExampleResult& out) {
    std::mt19937_64 rng(seed);
    const TokenGrid* grid = &full;
    TokenGrid crop;
    if (full.timesteps > model_cfg.max_timesteps) {
      std::uniform_int_distribution<int32_t> start(0, full.timesteps - model_cfg.max_timesteps);
      crop = slice_timesteps(full, start(rng), model_cfg.max_timesteps);
      grid = &crop;
    }
    MaskGrid mask = model_cfg.role == ModelRole::coarse
                        ? sample_training_mask(grid->timesteps, grid->levels, rng)
                        : sample_c2f_training_mask(grid->timesteps, model_cfg.n_coarse,
                                                   model_cfg.n_fine, rng);
    DropoutSpec dropout{train_cfg.dropout, train_cfg.dropout > 0 ? &rng : nullptr};
    auto lg = loss_and_grad<float>(model_cfg, result.params, *grid, mask, *grid, dropout);
    out.loss = double(lg.loss);
    out.masked_fraction = double(masked_count(mask)) / double(mask.size());
    out.grad = std::move(lg.grad);
  };

  std::vector<ExampleResult> batch(size_t(train_cfg.batch));
  std::vector<float> grad(size_t(layout.total));
  for (int32_t step = 1; step <= train_cfg.steps; ++step) {
    // Batch assembly from a step-keyed stream, then per-example work items.
    std::mt19937_64 pick_rng(splitmix64(train_cfg.seed ^ 0xba7c4u) + uint64_t(step));
    std::uniform_int_distribution<size_t> pick(0, corpus.size() - 1);
    std::vector<size_t> chosen(size_t(train_cfg.batch));
    for (auto& c : chosen) c = pick(pick_rng);

    if (n_threads == 1 || train_cfg.batch == 1) {
      for (int32_t i = 0; i < train_cfg.batch; ++i) {
        run_example(corpus[chosen[size_t(i)]], example_seed(step, i), batch[size_t(i)]);
      }
    } else {
      std::vector<std::thread> workers;
      std::atomic<int32_t> next{0};
      for (int32_t w = 0; w < std::min(n_threads, train_cfg.batch); ++w) {
        workers.emplace_back([&] {
          for (int32_t i = next.fetch_add(1); i < train_cfg.batch; i = next.fetch_add(1)) {
            run_example(corpus[chosen[size_t(i)]], example_seed(step, i), batch[size_t(i)]);
          }
        });
      }
      for (auto& t : workers) t.join();
    }

    // Reduce in example order so results do not depend on thread count.
    std::fill(grad.begin(), grad.end(), 0.0f);
    double loss = 0, masked_frac = 0;
    for (int32_t i = 0; i < train_cfg.batch; ++i) {
      loss += batch[size_t(i)].loss;
      masked_frac += batch[size_t(i)].masked_fraction;
      const auto& g = batch[size_t(i)].grad;
      for (size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
    }
    const float inv_batch = 1.0f / float(train_cfg.batch);
    for (auto& g : grad) g *= inv_batch;
    loss /= train_cfg.batch;
    masked_frac /= train_cfg.batch;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at step " + std::to_string(step));
    }

    if (train_cfg.clip_norm > 0) {
      double norm_sq = 0;
      for (float g : grad) norm_sq += double(g) * g;
      double norm = std::sqrt(norm_sq);
      if (norm > train_cfg.clip_norm) {
        float scale = float(train_cfg.clip_norm / norm);
        for (auto& g : grad) g *= scale;
      }
    }

    const double lr = learning_rate_at(train_cfg, step);
    const double bc1 = 1.0 - std::pow(train_cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(train_cfg.beta2, step);
    for (size_t j = 0; j < grad.size(); ++j) {
      m[j] = float(train_cfg.beta1 * m[j] + (1.0 - train_cfg.beta1) * grad[j]);
      v[j] = float(train_cfg.beta2 * v[j] + (1.0 - train_cfg.beta2) * double(grad[j]) * grad[j]);
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      double update = mhat / (std::sqrt(vhat) + 1e-8) + train_cfg.weight_decay * result.params[j];
      result.params[j] = float(result.params[j] - lr * update);
    }

    result.history.push_back({step, loss, lr, masked_frac});

    if (!val_corpus.empty() && (step % train_cfg.eval_every == 0 || step == train_cfg.steps)) {
      double val_loss = 0;
      for (size_t i = 0; i < val_corpus.size(); ++i) {
        ExampleResult er;
        // Fixed per-clip seed: the same masks every evaluation.
        run_example(val_corpus[i], splitmix64(0x7a11dull ^ i), er);
        val_loss += er.loss;
      }
      result.val_history.emplace_back(step, val_loss / double(val_corpus.size()));
    }
  }
  return result;
}

void write_history_csv(const TrainResult& result, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "step,loss,lr,masked_fraction_mean\n";
  for (const auto& e : result.history) {
    f << e.step << ',' << e.loss << ',' << e.lr << ',' << e.masked_fraction_mean << '\n';
  }
}

GenerationResult generate(const ModelConfig& coarse_cfg, const std::vector<float>& coarse_params,
                          const ModelConfig& c2f_cfg, const std::vector<float>& c2f_params,
                          const GenerationRequest& req) {
  coarse_cfg.validate();
  c2f_cfg.validate();
  if (coarse_cfg.role != ModelRole::coarse || c2f_cfg.role != ModelRole::coarse_to_fine) {
    throw ArgumentError("generate needs a coarse and a coarse-to-fine model");
  }
  if (c2f_cfg.n_coarse != coarse_cfg.n_levels) {
    throw ArgumentError("stage level counts disagree");
  }
  req.input.validate();
  if (req.input.levels != c2f_cfg.n_levels) {
    throw ArgumentError("input grid must carry the full hierarchy");
  }

  const int32_t t_len = req.input.timesteps;
  const int32_t nc = coarse_cfg.n_levels;
  const MaskGrid prompt = build_prompt_mask(req.prompt, t_len, req.input.levels);

  // Stage 1: coarse sub-grid under the prompt's coarse columns.
  TokenGrid coarse_grid = slice_levels(req.input, 0, nc);
  MaskGrid coarse_prompt(t_len, nc);
  for (int32_t t = 0; t < t_len; ++t) {
    for (int32_t n = 0; n < nc; ++n) coarse_prompt.set(t, n, prompt.at(t, n));
  }
  ForwardFn coarse_fwd = [&](const TokenGrid& g, const MaskGrid& m) {
    return forward<float>(coarse_cfg, coarse_params, g, m);
  };
  auto [coarse_out, coarse_trace] =
      decode_iterative(coarse_fwd, coarse_grid, coarse_prompt, req.coarse);

  // Stage 2: full grid with stage-1 coarse tokens fixed; the fine columns
  // follow the prompt directly.
  TokenGrid full = req.input;
  for (int32_t t = 0; t < t_len; ++t) {
    for (int32_t n = 0; n < nc; ++n) full.at(t, n) = coarse_out.at(t, n);
  }
  MaskGrid fine_prompt(t_len, req.input.levels);
  for (int32_t t = 0; t < t_len; ++t) {
    for (int32_t n = nc; n < req.input.levels; ++n) fine_prompt.set(t, n, prompt.at(t, n));
  }
  ForwardFn c2f_fwd = [&](const TokenGrid& g, const MaskGrid& m) {
    auto view = c2f_view(c2f_cfg, g, m);
    return forward<float>(c2f_cfg, c2f_params, *view.grid, *view.mask);
  };
  auto [final_grid, c2f_trace] =
      decode_iterative(c2f_fwd, full, fine_prompt, req.c2f, nc);

  GenerationResult result;
  result.tokens = std::move(final_grid);
  result.coarse_passes = coarse_trace.forward_passes;
  result.c2f_passes = c2f_trace.forward_passes;
  result.coarse_trace = std::move(coarse_trace);
  result.c2f_trace = std::move(c2f_trace);
  return result;
}

int64_t autoregressive_passes(double duration_s, double token_rate) {
  if (duration_s <= 0 || token_rate <= 0) throw ArgumentError("positive duration and rate");
  return int64_t(std::ceil(duration_s * token_rate));
}

size_t write_checkpoint(const Checkpoint& ckpt, std::ostream& sink) {
  ckpt.config.validate();
  ParamLayout layout(ckpt.config);
  if (int64_t(ckpt.params.size()) != layout.total) {
    throw ArgumentError("parameter vector size does not match config");
  }
  // Payload (everything after the version byte) goes through the checksum.
  std::ostringstream payload_stream;
  {
    detail::Writer pw(payload_stream);
    pw.u8(uint8_t(ckpt.config.role));
    pw.u32(uint32_t(ckpt.config.embed_dim));
    pw.u32(uint32_t(ckpt.config.layers));
    pw.u32(uint32_t(ckpt.config.heads));
    pw.u32(uint32_t(ckpt.config.n_levels));
    pw.u32(uint32_t(ckpt.config.vocab));
    pw.u32(uint32_t(ckpt.config.max_timesteps));
    pw.u32(uint32_t(ckpt.config.rel_window));
    pw.u32(uint32_t(ckpt.config.n_coarse));
    pw.u32(uint32_t(ckpt.config.n_fine));
    pw.u64(uint64_t(ckpt.params.size()));
    for (float p : ckpt.params) pw.f32(p);
  }
  std::string payload = payload_stream.str();
  uint32_t crc = uint32_t(::crc32(0, reinterpret_cast<const Bytef*>(payload.data()),
                                  uInt(payload.size())));
  detail::Writer w(sink);
  w.magic(kCheckpointMagic);
  w.u8(kVersion);
  w.bytes(payload.data(), payload.size());
  w.u32(crc);
  return w.offset();
}

Checkpoint read_checkpoint(std::istream& source) {
  detail::Reader r(source);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  uint8_t version = r.u8();
  if (version != kVersion) {
    throw UnsupportedVersionError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  uint32_t crc = uint32_t(::crc32(0, nullptr, 0));
  auto track = [&](auto value_bytes) {
    crc = uint32_t(::crc32(crc, reinterpret_cast<const Bytef*>(value_bytes.data()),
                           uInt(value_bytes.size())));
  };
  // Re-serialize header fields as read to feed the checksum.
  std::string header;
  auto read_u8 = [&]() {
    uint8_t v = r.u8();
    header.push_back(char(v));
    return v;
  };
  auto read_u32 = [&]() {
    uint32_t v = r.u32();
    for (int i = 0; i < 4; ++i) header.push_back(char(uint8_t(v >> (8 * i))));
    return v;
  };
  auto read_u64 = [&]() {
    uint64_t v = r.u64();
    for (int i = 0; i < 8; ++i) header.push_back(char(uint8_t(v >> (8 * i))));
    return v;
  };
  uint8_t role = read_u8();
  if (role > 1) throw FormatError("checkpoint role out of range");
  ckpt.config.role = ModelRole(role);
  ckpt.config.embed_dim = int32_t(read_u32());
  ckpt.config.layers = int32_t(read_u32());
  ckpt.config.heads = int32_t(read_u32());
  ckpt.config.n_levels = int32_t(read_u32());
  ckpt.config.vocab = int32_t(read_u32());
  ckpt.config.max_timesteps = int32_t(read_u32());
  ckpt.config.rel_window = int32_t(read_u32());
  ckpt.config.n_coarse = int32_t(read_u32());
  ckpt.config.n_fine = int32_t(read_u32());
  uint64_t count = read_u64();
  track(header);

  ckpt.config.validate();
  ParamLayout layout(ckpt.config);
  if (int64_t(count) != layout.total) throw FormatError("checkpoint parameter count mismatch");
  ckpt.params.resize(size_t(count));
  std::vector<char> raw(size_t(count) * 4);
  r.bytes(raw.data(), raw.size());
  track(raw);
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= uint32_t(uint8_t(raw[i * 4 + b])) << (8 * b);
    float f;
    std::memcpy(&f, &bits, 4);
    ckpt.params[i] = f;
  }
  uint32_t stored = r.u32();
  if (stored != crc) throw CorruptionError("checkpoint checksum mismatch");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  write_checkpoint(ckpt, f);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return read_checkpoint(f);
}

}  // namespace vamp
