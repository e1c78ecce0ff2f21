// Command-line front end: corpus synthesis, codec fitting, tokenization,
// masked-token training, prompted generation, and evaluation sweeps.
//
// Every command resolves a flat key=value RunConfig (defaults, then --config
// file, then --set overrides), logs it under a run directory named by the
// config hash, and writes all artifacts inside that directory.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "run_config.hpp"
#include "vamp/errors.hpp"
#include "vamp/eval.hpp"
#include "vamp/masking.hpp"
#include "vamp/pipeline.hpp"
#include "vamp/prompts.hpp"
#include "vamp/sampler.hpp"
#include "vamp/synth.hpp"
#include "vamp/tokenizer.hpp"
#include "vamp/tokens.hpp"
#include "vamp/wav.hpp"

namespace fs = std::filesystem;
using namespace vamp;
using vampkit::RunConfig;

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_root = "runs";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key=value config file");
  cmd->add_option("--set", args.overrides, "override a config key (key=value)")
      ->take_all();
  cmd->add_option("--out", args.out_root, "root directory for run outputs");
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_file.empty()) cfg.load_file(args.config_file);
  for (const auto& kv : args.overrides) cfg.set_kv(kv);
  return cfg;
}

fs::path make_run_dir(const CommonArgs& args, const RunConfig& cfg, const std::string& command) {
  fs::path dir = fs::path(args.out_root) / (command + "-" + cfg.config_hash().substr(0, 12));
  fs::create_directories(dir);
  std::ofstream log(dir / "config.txt");
  log << cfg.resolved_text();
  std::cout << "run dir: " << dir.string() << "\n";
  return dir;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty() || !fs::exists(path)) {
    throw CLI::ValidationError(what, "missing required path: '" + path + "'");
  }
}

std::vector<fs::path> list_wavs(const std::string& dir, const std::string& prefix = "") {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".wav") continue;
    if (!prefix.empty() && entry.path().filename().string().rfind(prefix, 0) != 0) continue;
    out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> list_streams(const std::string& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".vmpt") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ModelConfig model_config_from(const RunConfig& cfg, ModelRole role) {
  ModelConfig model;
  model.role = role;
  model.embed_dim = int32_t(cfg.get_int("model.embed_dim"));
  model.layers = int32_t(cfg.get_int("model.layers"));
  model.heads = int32_t(cfg.get_int("model.heads"));
  model.rel_window = int32_t(cfg.get_int("model.rel_window"));
  model.max_timesteps = int32_t(cfg.get_int("model.max_timesteps"));
  model.vocab = int32_t(cfg.get_int("codec.entries"));
  const int32_t nc = int32_t(cfg.get_int("model.coarse_levels"));
  const int32_t nf = int32_t(cfg.get_int("model.fine_levels"));
  if (role == ModelRole::coarse) {
    model.n_levels = nc;
  } else {
    model.n_levels = nc + nf;
    model.n_coarse = nc;
    model.n_fine = nf;
  }
  return model;
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig train;
  train.steps = int32_t(cfg.get_int("train.steps"));
  train.batch = int32_t(cfg.get_int("train.batch"));
  train.lr = cfg.get_double("train.lr");
  train.warmup = int32_t(cfg.get_int("train.warmup"));
  train.beta1 = cfg.get_double("train.beta1");
  train.beta2 = cfg.get_double("train.beta2");
  train.weight_decay = cfg.get_double("train.weight_decay");
  train.dropout = cfg.get_double("train.dropout");
  train.clip_norm = cfg.get_double("train.clip_norm");
  train.seed = cfg.get_seed("train.seed");
  train.eval_every = int32_t(cfg.get_int("train.eval_every"));
  train.threads = int32_t(cfg.get_int("train.threads"));
  return train;
}

// max_timesteps bounds training crops; with clipped relative attention there
// are no length-dependent parameters, so inference may run on longer grids.
void allow_length(Checkpoint& ckpt, int32_t t_len) {
  ckpt.config.max_timesteps = std::max(ckpt.config.max_timesteps, t_len);
}

// Fills unresolved beat parts of a prompt from a beat-times file.
void resolve_beats(PromptSpec& spec, const std::string& beats_flag, double token_rate,
                   int32_t t_count) {
  for (auto& part : spec.parts) {
    if (auto* beat = std::get_if<BeatSpec>(&part)) {
      if (!beat->beat_steps.empty()) continue;
      std::string file = !beats_flag.empty() ? beats_flag : beat->beat_file;
      if (file.empty()) {
        throw CLI::ValidationError("--beats", "beat prompt needs a beat-times file");
      }
      require_file(file, "--beats");
      beat->beat_steps = beats_to_steps(read_beat_file(file), token_rate, t_count);
      beat->beat_file.clear();
    }
  }
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const CommonArgs& common) {
  RunConfig cfg = resolve_config(common);
  fs::path dir = make_run_dir(common, cfg, "synth");

  CorpusParams params;
  params.duration_s = cfg.get_double("synth.duration");
  params.sample_rate = int32_t(cfg.get_int("synth.sample_rate"));
  params.artists_per_split = int32_t(cfg.get_int("synth.artists_per_split"));
  Loudness loudness =
      cfg.get("synth.loudness") == "rms" ? Loudness::rms24 : Loudness::peak;

  CorpusSplits splits =
      build_corpus(int32_t(cfg.get_int("synth.clips")), cfg.get_seed("synth.seed"), params);
  std::ofstream manifest(dir / "clips.txt");
  auto emit = [&](const std::vector<ClipSpec>& split, const std::string& name) {
    for (size_t i = 0; i < split.size(); ++i) {
      ClipSpec spec = split[i];
      spec.loudness = loudness;
      Clip clip = generate_clip(spec);
      char stem[64];
      std::snprintf(stem, sizeof stem, "%s_%04zu", name.c_str(), i);
      write_wav(clip.audio, (dir / (std::string(stem) + ".wav")).string());
      write_beat_file(clip.beat_times, (dir / (std::string(stem) + ".beats.txt")).string());
      manifest << stem << ' ' << spec.seed << ' ' << spec.preset.name << ' '
               << spec.tempo_bpm << '\n';
    }
  };
  emit(splits.train, "train");
  emit(splits.val, "val");
  emit(splits.test, "test");
  std::cout << "clips: " << splits.train.size() << " train, " << splits.val.size()
            << " val, " << splits.test.size() << " test\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit-codec

int cmd_fit_codec(const CommonArgs& common, const std::string& audio_dir) {
  RunConfig cfg = resolve_config(common);
  require_file(audio_dir, "--audio");
  fs::path dir = make_run_dir(common, cfg, "fit-codec");

  RvqFitParams params;
  params.sample_rate = int32_t(cfg.get_int("codec.sample_rate"));
  params.frame_len = int32_t(cfg.get_int("codec.frame_len"));
  params.hop = int32_t(cfg.get_int("codec.hop"));
  params.stages = int32_t(cfg.get_int("codec.stages"));
  params.entries = int32_t(cfg.get_int("codec.entries"));
  params.kmeans_iters = int32_t(cfg.get_int("codec.kmeans_iters"));
  params.seed = cfg.get_seed("codec.seed");

  std::vector<std::vector<float>> frames;
  auto wavs = list_wavs(audio_dir, "train");
  if (wavs.empty()) wavs = list_wavs(audio_dir);
  if (wavs.empty()) throw CLI::ValidationError("--audio", "no .wav files in " + audio_dir);
  for (const auto& path : wavs) {
    Signal x = read_wav(path.string());
    auto f = extract_frames(x, params.frame_len, params.hop);
    frames.insert(frames.end(), f.begin(), f.end());
  }
  RvqCodec codec = fit_rvq(frames, params);
  save_codec(codec, (dir / "codec.vmpc").string());
  std::cout << "fitted " << codec.stages << "-stage codec on " << frames.size()
            << " frames; token rate " << codec.token_rate() << " Hz, bitrate "
            << codec.bitrate_bps() << " bps\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tokenize

int cmd_tokenize(const CommonArgs& common, const std::string& codec_path,
                 const std::string& audio_dir) {
  RunConfig cfg = resolve_config(common);
  require_file(codec_path, "--codec");
  require_file(audio_dir, "--audio");
  fs::path dir = make_run_dir(common, cfg, "tokenize");

  RvqCodec codec = load_codec(codec_path);
  auto wavs = list_wavs(audio_dir);
  if (wavs.empty()) throw CLI::ValidationError("--audio", "no .wav files in " + audio_dir);
  for (const auto& path : wavs) {
    TokenGrid g = encode(codec, read_wav(path.string()));
    save_token_stream(g, (dir / (path.stem().string() + ".vmpt")).string());
  }
  std::cout << "tokenized " << wavs.size() << " clips\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const CommonArgs& common, const std::string& tokens_dir,
              const std::string& role_name, const std::string& val_dir) {
  RunConfig cfg = resolve_config(common);
  require_file(tokens_dir, "--tokens");
  if (role_name != "coarse" && role_name != "c2f") {
    throw CLI::ValidationError("--role", "role must be 'coarse' or 'c2f'");
  }
  fs::path dir = make_run_dir(common, cfg, "train-" + role_name);

  const ModelRole role = role_name == "coarse" ? ModelRole::coarse : ModelRole::coarse_to_fine;
  ModelConfig model = model_config_from(cfg, role);
  const int32_t nc = int32_t(cfg.get_int("model.coarse_levels"));

  auto load_dir = [&](const std::string& d) {
    std::vector<TokenGrid> grids;
    for (const auto& path : list_streams(d)) {
      TokenGrid g = load_token_stream(path.string());
      grids.push_back(role == ModelRole::coarse ? slice_levels(g, 0, nc) : g);
    }
    return grids;
  };
  std::vector<TokenGrid> corpus = load_dir(tokens_dir);
  if (corpus.empty()) throw CLI::ValidationError("--tokens", "no .vmpt files in " + tokens_dir);
  if (role == ModelRole::coarse_to_fine && corpus.front().levels != model.n_levels) {
    throw ArgumentError(
        "token streams carry " + std::to_string(corpus.front().levels) +
        " levels but model.coarse_levels + model.fine_levels = " +
        std::to_string(model.n_levels) + "; align the model config with the codec");
  }
  std::vector<TokenGrid> val;
  if (!val_dir.empty()) {
    require_file(val_dir, "--val-tokens");
    val = load_dir(val_dir);
  }

  TrainResult result = train(model, corpus, train_config_from(cfg), val);
  save_checkpoint({model, result.params}, (dir / "model.vmpw").string());
  write_history_csv(result, (dir / "loss.csv").string());
  if (!result.val_history.empty()) {
    std::ofstream f(dir / "val.csv");
    f << "step,val_loss\n";
    for (const auto& [step, loss] : result.val_history) f << step << ',' << loss << '\n';
  }
  std::cout << "trained " << role_name << " model on " << corpus.size() << " grids; final loss "
            << result.history.back().loss << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// vamp

struct VampArgs {
  std::string coarse_path, c2f_path, codec_path, input, prompt_text, beats_file;
  int32_t steps = -1, c2f_steps = -1;
  int64_t seed = -1;
  bool trace = false;
};

GenerationRequest build_request(const RunConfig& cfg, const VampArgs& args,
                                const RvqCodec& codec, TokenGrid input) {
  GenerationRequest req;
  req.input = std::move(input);
  req.prompt = parse_prompt(args.prompt_text);
  resolve_beats(req.prompt, args.beats_file, codec.token_rate(), req.input.timesteps);
  req.coarse.steps = args.steps > 0 ? args.steps : int32_t(cfg.get_int("sampler.steps"));
  req.coarse.temp0 = cfg.get_double("sampler.temp0");
  req.coarse.seed = args.seed >= 0 ? uint64_t(args.seed) : cfg.get_seed("sampler.seed");
  req.c2f.steps = args.c2f_steps > 0 ? args.c2f_steps : int32_t(cfg.get_int("sampler.c2f_steps"));
  req.c2f.temp0 = req.coarse.temp0;
  req.c2f.seed = req.coarse.seed + 1;
  req.coarse.record_trace = args.trace;
  req.c2f.record_trace = args.trace;
  return req;
}

int cmd_vamp(const CommonArgs& common, const VampArgs& args) {
  RunConfig cfg = resolve_config(common);
  require_file(args.coarse_path, "--coarse");
  require_file(args.c2f_path, "--c2f");
  require_file(args.codec_path, "--codec");
  require_file(args.input, "--input");
  fs::path dir = make_run_dir(common, cfg, "vamp");

  Checkpoint coarse = load_checkpoint(args.coarse_path);
  Checkpoint c2f = load_checkpoint(args.c2f_path);
  RvqCodec codec = load_codec(args.codec_path);

  TokenGrid input = fs::path(args.input).extension() == ".vmpt"
                        ? load_token_stream(args.input)
                        : encode(codec, read_wav(args.input));
  save_token_stream(input, (dir / "input.vmpt").string());

  GenerationRequest req = build_request(cfg, args, codec, std::move(input));
  allow_length(coarse, req.input.timesteps);
  allow_length(c2f, req.input.timesteps);
  GenerationResult result = generate(coarse.config, coarse.params, c2f.config, c2f.params, req);

  save_token_stream(result.tokens, (dir / "output.vmpt").string());
  write_wav(decode(codec, result.tokens), (dir / "output.wav").string());
  if (args.trace) {
    std::ofstream fc(dir / "trace_coarse.csv");
    write_trace_csv(result.coarse_trace, fc);
    std::ofstream ff(dir / "trace_c2f.csv");
    write_trace_csv(result.c2f_trace, ff);
  }

  MaskGrid prompt_mask = build_prompt_mask(req.prompt, req.input.timesteps, req.input.levels);
  double bitrate = effective_bitrate(prompt_mask, codec.bitrate_bps());
  std::cout << "prompt " << req.prompt.text << "\n"
            << "effective bitrate: " << bitrate << " bps of " << codec.bitrate_bps()
            << " bps\n"
            << "forward passes: " << result.coarse_passes << " coarse + " << result.c2f_passes
            << " fine = " << result.total_passes() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate / sweep-steps shared machinery

struct ConditionMetrics {
  std::string name;
  double bitrate = 0;
  double mean_mel = 0;
  double proxy_fad = 0;
  int32_t passes = 0;
};

struct EvalContext {
  Checkpoint coarse, c2f;
  RvqCodec codec;
  std::vector<Signal> clips;
  std::vector<std::string> clip_ids;
  std::vector<std::vector<double>> clip_beats;
  MelConfig mel;
  GaussianStats real_stats;
};

EvalContext load_eval_context(const RunConfig& cfg, const std::string& coarse_path,
                              const std::string& c2f_path, const std::string& codec_path,
                              const std::string& audio_dir) {
  require_file(coarse_path, "--coarse");
  require_file(c2f_path, "--c2f");
  require_file(codec_path, "--codec");
  require_file(audio_dir, "--audio");
  EvalContext ctx;
  ctx.coarse = load_checkpoint(coarse_path);
  ctx.c2f = load_checkpoint(c2f_path);
  ctx.codec = load_codec(codec_path);
  ctx.mel.log_floor = cfg.get_double("eval.log_floor");
  auto wavs = list_wavs(audio_dir);
  if (wavs.empty()) throw CLI::ValidationError("--audio", "no .wav files in " + audio_dir);
  std::vector<Eigen::VectorXd> real_rows;
  for (const auto& path : wavs) {
    Signal x = read_wav(path.string());
    ctx.clip_ids.push_back(path.stem().string());
    fs::path beats = path.parent_path() / (path.stem().string() + ".beats.txt");
    ctx.clip_beats.push_back(fs::exists(beats) ? read_beat_file(beats.string())
                                               : std::vector<double>{});
    real_rows.push_back(embed(x, ctx.mel.log_floor));
    ctx.clips.push_back(std::move(x));
  }
  ctx.real_stats = fit_gaussian(real_rows);
  return ctx;
}

Signal trimmed(const Signal& x, int64_t len) {
  Signal out;
  out.sample_rate = x.sample_rate;
  out.samples.assign(x.samples.begin(), x.samples.begin() + len);
  return out;
}

// Runs one prompt condition over every clip and seed; appends per-clip rows
// to `rows` and returns the aggregate.
ConditionMetrics run_condition(EvalContext& ctx, const std::string& prompt_text,
                               int32_t steps, int32_t c2f_steps, double temp0,
                               uint64_t seed_base, int32_t seeds, std::ostream& rows) {
  ConditionMetrics metrics;
  metrics.name = prompt_text + "@steps=" + std::to_string(steps);
  std::vector<Eigen::VectorXd> gen_rows;
  double mel_sum = 0;
  int32_t count = 0;
  for (size_t ci = 0; ci < ctx.clips.size(); ++ci) {
    const Signal& original = ctx.clips[ci];
    TokenGrid input = encode(ctx.codec, original);
    allow_length(ctx.coarse, input.timesteps);
    allow_length(ctx.c2f, input.timesteps);
    PromptSpec prompt = parse_prompt(prompt_text);
    for (auto& part : prompt.parts) {
      if (auto* beat = std::get_if<BeatSpec>(&part)) {
        if (beat->beat_steps.empty()) {
          beat->beat_steps =
              beats_to_steps(ctx.clip_beats[ci], ctx.codec.token_rate(), input.timesteps);
          beat->beat_file.clear();
        }
      }
    }
    MaskGrid mask = build_prompt_mask(prompt, input.timesteps, input.levels);
    metrics.bitrate = effective_bitrate(mask, ctx.codec.bitrate_bps());
    for (int32_t s = 0; s < seeds; ++s) {
      GenerationRequest req;
      req.input = input;
      req.prompt = prompt;
      req.coarse.steps = steps;
      req.coarse.temp0 = temp0;
      req.coarse.seed = seed_base + ci * 131 + uint64_t(s);
      req.c2f.steps = c2f_steps;
      req.c2f.temp0 = temp0;
      req.c2f.seed = req.coarse.seed + 1;
      GenerationResult out =
          generate(ctx.coarse.config, ctx.coarse.params, ctx.c2f.config, ctx.c2f.params, req);
      metrics.passes = out.total_passes();
      Signal audio = decode(ctx.codec, out.tokens);
      double mel = multiscale_mel_error(trimmed(original, audio.length()), audio, ctx.mel);
      gen_rows.push_back(embed(audio, ctx.mel.log_floor));
      mel_sum += mel;
      count += 1;
      rows << ctx.clip_ids[ci] << ',' << prompt_text << ',' << steps << ','
           << metrics.bitrate << ',' << mel << ',' << metrics.name << '\n';
    }
  }
  metrics.mean_mel = mel_sum / count;
  metrics.proxy_fad = frechet(ctx.real_stats, fit_gaussian(gen_rows));
  return metrics;
}

ConditionMetrics run_noisy_condition(const EvalContext& ctx, double r, uint64_t seed_base,
                                     int32_t seeds, std::ostream& rows) {
  ConditionMetrics metrics;
  metrics.name = "noisy@r=" + std::to_string(r);
  std::vector<Eigen::VectorXd> gen_rows;
  double mel_sum = 0;
  int32_t count = 0;
  for (size_t ci = 0; ci < ctx.clips.size(); ++ci) {
    const Signal& original = ctx.clips[ci];
    TokenGrid input = encode(ctx.codec, original);
    metrics.bitrate = ctx.codec.bitrate_bps() * (1.0 - r);
    for (int32_t s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(seed_base + ci * 131 + uint64_t(s));
      Signal audio = decode(ctx.codec, noisy_baseline(input, r, rng));
      double mel = multiscale_mel_error(trimmed(original, audio.length()), audio, ctx.mel);
      gen_rows.push_back(embed(audio, ctx.mel.log_floor));
      mel_sum += mel;
      count += 1;
      rows << ctx.clip_ids[ci] << ",noisy:r=" << r << ",0," << metrics.bitrate << ',' << mel
           << ',' << metrics.name << '\n';
    }
  }
  metrics.mean_mel = mel_sum / count;
  metrics.proxy_fad = frechet(ctx.real_stats, fit_gaussian(gen_rows));
  return metrics;
}

void write_summary(const fs::path& path, const std::vector<ConditionMetrics>& all) {
  std::ofstream f(path);
  f << "condition,bitrate_bps,mean_mel_error,proxy_fad,forward_passes\n";
  for (const auto& m : all) {
    f << m.name << ',' << m.bitrate << ',' << m.mean_mel << ',' << m.proxy_fad << ','
      << m.passes << '\n';
  }
}

int cmd_evaluate(const CommonArgs& common, const std::string& coarse_path,
                 const std::string& c2f_path, const std::string& codec_path,
                 const std::string& audio_dir, std::vector<std::string> prompts,
                 std::vector<double> noise_ratios, int32_t steps_flag) {
  RunConfig cfg = resolve_config(common);
  fs::path dir = make_run_dir(common, cfg, "evaluate");
  EvalContext ctx = load_eval_context(cfg, coarse_path, c2f_path, codec_path, audio_dir);

  if (prompts.empty()) {
    prompts = {"compression:Nk=1+periodic:P=1", "compression:Nk=1+periodic:P=2",
               "compression:Nk=1+periodic:P=4", "compression:Nk=1+periodic:P=8"};
  }
  const int32_t steps = steps_flag > 0 ? steps_flag : int32_t(cfg.get_int("sampler.steps"));
  const int32_t c2f_steps = int32_t(cfg.get_int("sampler.c2f_steps"));
  const int32_t seeds = int32_t(cfg.get_int("eval.seeds"));
  const double temp0 = cfg.get_double("sampler.temp0");
  const uint64_t seed_base = cfg.get_seed("sampler.seed");

  std::ofstream rows(dir / "metrics.csv");
  rows << "clip_id,prompt_spec,steps,bitrate_bps,mel_error,fad_group\n";
  std::vector<ConditionMetrics> all;
  for (const auto& prompt : prompts) {
    all.push_back(run_condition(ctx, prompt, steps, c2f_steps, temp0, seed_base, seeds, rows));
    std::cout << all.back().name << ": mel " << all.back().mean_mel << ", fad "
              << all.back().proxy_fad << ", bitrate " << all.back().bitrate << "\n";
  }
  for (double r : noise_ratios) {
    all.push_back(run_noisy_condition(ctx, r, seed_base ^ 0x5eedull, seeds, rows));
    std::cout << all.back().name << ": mel " << all.back().mean_mel << ", fad "
              << all.back().proxy_fad << "\n";
  }
  write_summary(dir / "summary.csv", all);
  return 0;
}

int cmd_sweep_steps(const CommonArgs& common, const std::string& coarse_path,
                    const std::string& c2f_path, const std::string& codec_path,
                    const std::string& audio_dir, const std::string& prompt_text,
                    std::vector<int32_t> steps_list) {
  RunConfig cfg = resolve_config(common);
  fs::path dir = make_run_dir(common, cfg, "sweep-steps");
  EvalContext ctx = load_eval_context(cfg, coarse_path, c2f_path, codec_path, audio_dir);

  if (steps_list.empty()) steps_list = {1, 4, 8, 12, 24, 36, 64, 72};
  const int32_t c2f_steps = int32_t(cfg.get_int("sampler.c2f_steps"));
  const int32_t seeds = int32_t(cfg.get_int("eval.seeds"));
  const double temp0 = cfg.get_double("sampler.temp0");
  const uint64_t seed_base = cfg.get_seed("sampler.seed");

  std::ofstream rows(dir / "metrics.csv");
  rows << "clip_id,prompt_spec,steps,bitrate_bps,mel_error,fad_group\n";
  std::ofstream sweep(dir / "sweep.csv");
  sweep << "steps,mel_error,proxy_fad,forward_passes\n";
  for (int32_t steps : steps_list) {
    ConditionMetrics m =
        run_condition(ctx, prompt_text, steps, c2f_steps, temp0, seed_base, seeds, rows);
    sweep << steps << ',' << m.mean_mel << ',' << m.proxy_fad << ',' << m.passes << '\n';
    std::cout << "steps " << steps << ": mel " << m.mean_mel << ", fad " << m.proxy_fad
              << ", passes " << m.passes << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked acoustic token modeling toolkit"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  add_common(synth, common);

  auto* fit = app.add_subcommand("fit-codec", "fit the residual quantizer on corpus frames");
  std::string fit_audio;
  add_common(fit, common);
  fit->add_option("--audio", fit_audio, "directory of training wav files")->required();

  auto* tokenize = app.add_subcommand("tokenize", "encode wav files to token streams");
  std::string tok_codec, tok_audio;
  add_common(tokenize, common);
  tokenize->add_option("--codec", tok_codec, "codec file")->required();
  tokenize->add_option("--audio", tok_audio, "directory of wav files")->required();

  auto* train_cmd = app.add_subcommand("train", "train the coarse or coarse-to-fine model");
  std::string train_tokens, train_role = "coarse", train_val;
  add_common(train_cmd, common);
  train_cmd->add_option("--tokens", train_tokens, "directory of token streams")->required();
  train_cmd->add_option("--role", train_role, "coarse | c2f");
  train_cmd->add_option("--val-tokens", train_val, "validation token streams");

  auto* vamp_cmd = app.add_subcommand("vamp", "regenerate the masked part of a token stream");
  VampArgs vamp_args;
  add_common(vamp_cmd, common);
  vamp_cmd->add_option("--coarse", vamp_args.coarse_path, "coarse checkpoint")->required();
  vamp_cmd->add_option("--c2f", vamp_args.c2f_path, "coarse-to-fine checkpoint")->required();
  vamp_cmd->add_option("--codec", vamp_args.codec_path, "codec file")->required();
  vamp_cmd->add_option("--input", vamp_args.input, "input wav or .vmpt stream")->required();
  vamp_cmd->add_option("--prompt", vamp_args.prompt_text, "prompt spec text")->required();
  vamp_cmd->add_option("--steps", vamp_args.steps, "coarse sampling iterations");
  vamp_cmd->add_option("--c2f-steps", vamp_args.c2f_steps, "fine sampling iterations");
  vamp_cmd->add_option("--seed", vamp_args.seed, "sampler seed");
  vamp_cmd->add_option("--beats", vamp_args.beats_file, "beat-times file for beat prompts");
  vamp_cmd->add_flag("--trace", vamp_args.trace, "write per-iteration trace CSVs");

  auto* eval_cmd = app.add_subcommand("evaluate", "per-condition metrics and summary CSVs");
  std::string ev_coarse, ev_c2f, ev_codec, ev_audio;
  std::vector<std::string> ev_prompts;
  std::vector<double> ev_noise;
  int32_t ev_steps = -1;
  add_common(eval_cmd, common);
  eval_cmd->add_option("--coarse", ev_coarse, "coarse checkpoint")->required();
  eval_cmd->add_option("--c2f", ev_c2f, "coarse-to-fine checkpoint")->required();
  eval_cmd->add_option("--codec", ev_codec, "codec file")->required();
  eval_cmd->add_option("--audio", ev_audio, "directory of evaluation wav files")->required();
  eval_cmd->add_option("--prompt", ev_prompts, "prompt condition (repeatable)")->take_all();
  eval_cmd->add_option("--noise", ev_noise, "noisy-token baseline ratio (repeatable)")
      ->take_all();
  eval_cmd->add_option("--steps", ev_steps, "coarse sampling iterations");

  auto* sweep_cmd = app.add_subcommand("sweep-steps", "metric-vs-steps sweep");
  std::string sw_coarse, sw_c2f, sw_codec, sw_audio, sw_prompt = "periodic:P=16";
  std::vector<int32_t> sw_steps;
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--coarse", sw_coarse, "coarse checkpoint")->required();
  sweep_cmd->add_option("--c2f", sw_c2f, "coarse-to-fine checkpoint")->required();
  sweep_cmd->add_option("--codec", sw_codec, "codec file")->required();
  sweep_cmd->add_option("--audio", sw_audio, "directory of evaluation wav files")->required();
  sweep_cmd->add_option("--prompt", sw_prompt, "prompt spec for the sweep");
  sweep_cmd->add_option("--steps-list", sw_steps, "step counts to sweep")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(common);
    if (fit->parsed()) return cmd_fit_codec(common, fit_audio);
    if (tokenize->parsed()) return cmd_tokenize(common, tok_codec, tok_audio);
    if (train_cmd->parsed()) return cmd_train(common, train_tokens, train_role, train_val);
    if (vamp_cmd->parsed()) return cmd_vamp(common, vamp_args);
    if (eval_cmd->parsed()) {
      return cmd_evaluate(common, ev_coarse, ev_c2f, ev_codec, ev_audio, ev_prompts, ev_noise,
                          ev_steps);
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep_steps(common, sw_coarse, sw_c2f, sw_codec, sw_audio, sw_prompt, sw_steps);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
