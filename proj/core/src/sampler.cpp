#include "vamp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "vamp/errors.hpp"
#include "vamp/masking.hpp"

namespace vamp {

double gumbel_sample(double u) {
  if (!(u > 0.0 && u < 1.0)) throw ArgumentError("gumbel_sample needs u in (0,1)");
  return -std::log(-std::log(u));
}

double confidence(double logp, double temp, double g) { return logp + temp * g; }

namespace {

struct Candidate {
  double conf;
  int32_t t;
  int32_t n;
};

}  // namespace

std::pair<TokenGrid, DecodeTrace> decode_iterative(const ForwardFn& model,
                                                   const TokenGrid& initial,
                                                   const MaskGrid& prompt,
                                                   const SamplerConfig& cfg,
                                                   int32_t logit_level_offset) {
  initial.validate();
  if (!prompt.same_shape(initial)) throw ArgumentError("prompt shape does not match grid");
  if (cfg.steps < 1) throw ArgumentError("sampler needs steps >= 1");
  if (cfg.temp0 < 0) throw ArgumentError("sampler needs temp0 >= 0");

  TokenGrid grid = initial;
  DecodeTrace trace;
  const int64_t d0 = masked_count(prompt);
  if (d0 == 0) return {grid, trace};

  for (int32_t t = 0; t < prompt.timesteps; ++t) {
    for (int32_t n = 0; n < prompt.levels; ++n) {
      if (prompt.at(t, n) && n < logit_level_offset) {
        throw ArgumentError("masked position outside the levels the model predicts");
      }
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  MaskGrid mask = prompt;
  std::vector<Candidate> sampled;
  std::vector<double> probs;

  for (int32_t iter = 1; iter <= cfg.steps; ++iter) {
    const int64_t masked_before = masked_count(mask);
    const double temp = cfg.temp0 * (1.0 - double(iter) / cfg.steps);
    Logits logits = model(grid, mask);
    if (logits.timesteps != grid.timesteps ||
        logits.levels + logit_level_offset != grid.levels) {
      throw ArgumentError("model logits shape does not match grid");
    }
    probs.resize(size_t(logits.vocab));

    sampled.clear();
    for (int32_t t = 0; t < grid.timesteps; ++t) {
      for (int32_t n = 0; n < grid.levels; ++n) {
        if (!mask.at(t, n)) continue;
        const int32_t vocab = int32_t(grid.vocab_sizes[size_t(n)]);
        if (vocab > logits.vocab) throw ArgumentError("grid vocabulary exceeds logits");
        // Softmax over the level vocabulary, in double.
        double mx = -std::numeric_limits<double>::infinity();
        for (int32_t c = 0; c < vocab; ++c) {
          mx = std::max(mx, double(logits.at(t, n - logit_level_offset, c)));
        }
        double sum = 0;
        for (int32_t c = 0; c < vocab; ++c) {
          probs[size_t(c)] = std::exp(double(logits.at(t, n - logit_level_offset, c)) - mx);
          sum += probs[size_t(c)];
        }
        if (!(sum > 0) || !std::isfinite(sum)) throw NumericError("bad logits row");
        // Categorical draw by CDF inversion, then independent Gumbel noise.
        double u_tok = uniform(rng);
        double target = u_tok * sum;
        double acc = 0;
        int32_t token = vocab - 1;
        for (int32_t c = 0; c < vocab; ++c) {
          acc += probs[size_t(c)];
          if (acc > target) {
            token = c;
            break;
          }
        }
        double u_noise = std::max(uniform(rng), std::numeric_limits<double>::min());
        double logp = std::log(probs[size_t(token)] / sum);
        double conf = confidence(logp, temp, gumbel_sample(u_noise));
        grid.at(t, n) = uint16_t(token);
        mask.set(t, n, false);
        sampled.push_back({conf, t, n});
      }
    }
    trace.forward_passes += 1;

    // Re-mask the k lowest-confidence samples; ties break by position.
    const int64_t k = num_to_mask(iter, cfg.steps, d0);
    std::sort(sampled.begin(), sampled.end(), [](const Candidate& a, const Candidate& b) {
      if (a.conf != b.conf) return a.conf < b.conf;
      if (a.t != b.t) return a.t < b.t;
      return a.n < b.n;
    });
    for (int64_t i = 0; i < k; ++i) mask.set(sampled[size_t(i)].t, sampled[size_t(i)].n, true);

    DecodeTrace::Iteration rec;
    rec.iter = iter;
    rec.masked_before = masked_before;
    rec.remask = k;
    rec.temp = temp;
    if (k < int64_t(sampled.size())) {
      rec.min_accepted_conf = sampled[size_t(k)].conf;
      rec.max_accepted_conf = sampled.back().conf;
    }
    if (cfg.record_trace) {
      for (size_t i = size_t(k); i < sampled.size(); ++i) {
        rec.accepted_conf.push_back(float(sampled[i].conf));
      }
    }
    trace.iterations.push_back(std::move(rec));
  }
  return {grid, trace};
}

void write_trace_csv(const DecodeTrace& trace, std::ostream& out) {
  out << "iter,masked_before,k,temp,min_accepted_conf,max_accepted_conf\n";
  for (const auto& it : trace.iterations) {
    out << it.iter << ',' << it.masked_before << ',' << it.remask << ',' << it.temp << ','
        << it.min_accepted_conf << ',' << it.max_accepted_conf << '\n';
  }
}

}  // namespace vamp
