#include "vamp/prompts.hpp"

#include <algorithm>
#include <charconv>

#include "vamp/errors.hpp"

namespace vamp {

MaskGrid periodic_mask(int32_t t, int32_t n, int32_t period, int32_t offset) {
  if (period < 1) throw ArgumentError("periodic prompt needs P >= 1");
  if (offset < 0 || offset >= period) throw ArgumentError("periodic offset must be in [0, P)");
  MaskGrid m(t, n, true);
  for (int32_t ts = offset; ts < t; ts += period) {
    for (int32_t lvl = 0; lvl < n; ++lvl) m.set(ts, lvl, false);
  }
  return m;
}

MaskGrid compression_mask(int32_t t, int32_t n, int32_t kept_levels) {
  if (kept_levels < 0 || kept_levels > n) {
    throw ArgumentError("compression prompt needs 0 <= Nk <= N");
  }
  MaskGrid m(t, n, true);
  for (int32_t ts = 0; ts < t; ++ts) {
    for (int32_t lvl = 0; lvl < kept_levels; ++lvl) m.set(ts, lvl, false);
  }
  return m;
}

MaskGrid inpaint_mask(int32_t t, int32_t n, int32_t prefix_steps, int32_t suffix_steps) {
  if (prefix_steps < 0 || suffix_steps < 0 || prefix_steps + suffix_steps > t) {
    throw ArgumentError("inpaint prompt needs prefix + suffix <= T");
  }
  MaskGrid m(t, n, true);
  for (int32_t ts = 0; ts < prefix_steps; ++ts) {
    for (int32_t lvl = 0; lvl < n; ++lvl) m.set(ts, lvl, false);
  }
  for (int32_t ts = t - suffix_steps; ts < t; ++ts) {
    for (int32_t lvl = 0; lvl < n; ++lvl) m.set(ts, lvl, false);
  }
  return m;
}

MaskGrid beat_mask(int32_t t, int32_t n, const std::vector<int32_t>& beat_steps,
                   int32_t width_steps) {
  if (width_steps < 0) throw ArgumentError("beat prompt needs width >= 0");
  if (!std::is_sorted(beat_steps.begin(), beat_steps.end())) {
    throw ArgumentError("beat steps must be sorted");
  }
  MaskGrid m(t, n, true);
  for (int32_t b : beat_steps) {
    if (b < 0 || b >= t) throw ArgumentError("beat step out of range");
    for (int32_t ts = b; ts < std::min(b + width_steps, t); ++ts) {
      for (int32_t lvl = 0; lvl < n; ++lvl) m.set(ts, lvl, false);
    }
  }
  return m;
}

MaskGrid combine(const MaskGrid& a, const MaskGrid& b) {
  if (a.timesteps != b.timesteps || a.levels != b.levels) {
    throw ArgumentError("combine needs masks of equal shape");
  }
  MaskGrid out = a;
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = (a.data[i] && b.data[i]) ? 1 : 0;
  }
  return out;
}

double effective_bitrate(const MaskGrid& m, double codec_bps) {
  if (!(codec_bps > 0)) throw ArgumentError("bitrate must be positive");
  int64_t total = m.size();
  int64_t kept = total - masked_count(m);
  return codec_bps * (double(kept) / double(total));
}

namespace {

int32_t parse_int(const std::string& text, const std::string& what) {
  int32_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ArgumentError("bad integer for " + what + ": '" + text + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t at = text.find(sep, start);
    out.push_back(text.substr(start, at - start));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return out;
}

PromptPart parse_part(const std::string& text) {
  size_t colon = text.find(':');
  std::string kind = text.substr(0, colon);
  std::vector<std::pair<std::string, std::string>> kv;
  if (colon != std::string::npos && colon + 1 < text.size()) {
    for (const auto& item : split(text.substr(colon + 1), ',')) {
      size_t eq = item.find('=');
      if (eq == std::string::npos) throw ArgumentError("expected key=value in prompt: " + item);
      kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
  }
  auto get = [&](const std::string& key) -> const std::string* {
    for (const auto& [k, v] : kv) {
      if (k == key) return &v;
    }
    return nullptr;
  };
  auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : kv) {
      if (std::find_if(allowed.begin(), allowed.end(),
                       [&](const char* a) { return k == a; }) == allowed.end()) {
        throw ArgumentError("unknown prompt key '" + k + "' in " + kind);
      }
    }
  };

  if (kind == "periodic") {
    reject_unknown({"P", "offset"});
    PeriodicSpec s;
    if (auto* v = get("P")) s.period = parse_int(*v, "P");
    if (auto* v = get("offset")) s.offset = parse_int(*v, "offset");
    return s;
  }
  if (kind == "compression") {
    reject_unknown({"Nk"});
    CompressionSpec s;
    if (auto* v = get("Nk")) s.kept_levels = parse_int(*v, "Nk");
    return s;
  }
  if (kind == "inpaint") {
    reject_unknown({"prefix", "suffix"});
    InpaintSpec s;
    if (auto* v = get("prefix")) s.prefix_steps = parse_int(*v, "prefix");
    if (auto* v = get("suffix")) s.suffix_steps = parse_int(*v, "suffix");
    return s;
  }
  if (kind == "beat") {
    reject_unknown({"width", "file", "steps"});
    BeatSpec s;
    if (auto* v = get("width")) s.width_steps = parse_int(*v, "width");
    if (auto* v = get("file")) s.beat_file = *v;
    if (auto* v = get("steps")) {
      for (const auto& item : split(*v, ';')) s.beat_steps.push_back(parse_int(item, "steps"));
    }
    return s;
  }
  throw ArgumentError("unknown prompt variant: '" + kind + "'");
}

}  // namespace

PromptSpec parse_prompt(const std::string& text) {
  if (text.empty()) throw ArgumentError("empty prompt spec");
  PromptSpec spec;
  spec.text = text;
  for (const auto& part : split(text, '+')) spec.parts.push_back(parse_part(part));
  return spec;
}

MaskGrid build_prompt_mask(const PromptSpec& spec, int32_t t, int32_t n) {
  if (spec.parts.empty()) throw ArgumentError("prompt spec has no parts");
  MaskGrid out(t, n, true);  // all-masked is the combine identity
  for (const auto& part : spec.parts) {
    MaskGrid m = std::visit(
        [&](const auto& s) -> MaskGrid {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, PeriodicSpec>) {
            return periodic_mask(t, n, s.period, s.offset);
          } else if constexpr (std::is_same_v<S, CompressionSpec>) {
            return compression_mask(t, n, s.kept_levels);
          } else if constexpr (std::is_same_v<S, InpaintSpec>) {
            return inpaint_mask(t, n, s.prefix_steps, s.suffix_steps);
          } else {
            if (!s.beat_file.empty() && s.beat_steps.empty()) {
              throw ArgumentError("beat prompt file not resolved: " + s.beat_file);
            }
            return beat_mask(t, n, s.beat_steps, s.width_steps);
          }
        },
        part);
    out = combine(out, m);
  }
  return out;
}

}  // namespace vamp
