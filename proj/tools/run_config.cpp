#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vampkit {

RunConfig::RunConfig() {
  // Codec defaults (token rate 62.5 Hz at 8 kHz).
  values_["codec.sample_rate"] = "8000";
  values_["codec.frame_len"] = "256";
  values_["codec.hop"] = "128";
  values_["codec.stages"] = "6";
  values_["codec.entries"] = "64";
  values_["codec.kmeans_iters"] = "12";
  values_["codec.seed"] = "0";
  // Model defaults.
  values_["model.embed_dim"] = "64";
  values_["model.layers"] = "4";
  values_["model.heads"] = "4";
  values_["model.rel_window"] = "32";
  values_["model.max_timesteps"] = "256";
  values_["model.coarse_levels"] = "2";
  values_["model.fine_levels"] = "4";
  // Training defaults.
  values_["train.steps"] = "2000";
  values_["train.batch"] = "16";
  values_["train.lr"] = "0.003";
  values_["train.warmup"] = "100";
  values_["train.beta1"] = "0.9";
  values_["train.beta2"] = "0.999";
  values_["train.weight_decay"] = "0.01";
  values_["train.dropout"] = "0";
  values_["train.clip_norm"] = "1";
  values_["train.seed"] = "0";
  values_["train.eval_every"] = "100";
  values_["train.threads"] = "0";
  // Sampler defaults.
  values_["sampler.steps"] = "24";
  values_["sampler.c2f_steps"] = "8";
  values_["sampler.temp0"] = "6.5";
  values_["sampler.seed"] = "0";
  // Synthetic corpus defaults.
  values_["synth.clips"] = "40";
  values_["synth.duration"] = "2";
  values_["synth.sample_rate"] = "8000";
  values_["synth.seed"] = "0";
  values_["synth.artists_per_split"] = "2";
  values_["synth.loudness"] = "peak";
  // Evaluation defaults.
  values_["eval.log_floor"] = "1e-5";
  values_["eval.seeds"] = "3";
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    size_t end = line.find_last_not_of(" \t\r");
    std::string item = line.substr(begin, end - begin + 1);
    try {
      set_kv(item);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("unknown config key: " + key);
  it->second = value;
}

void RunConfig::set_kv(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("expected key=value, got: " + assignment);
  }
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("unknown config key: " + key);
  return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::runtime_error("config key " + key + " is not an integer: " + v);
  }
  return out;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + " is not a number: " + v);
  }
}

uint64_t RunConfig::get_seed(const std::string& key) const {
  return uint64_t(get_int(key));
}

std::string RunConfig::resolved_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
  return out.str();
}

std::string RunConfig::config_hash() const {
  const std::string text = resolved_text();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace vampkit
