#include "hred/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hred {

namespace {

struct Beam {
  std::vector<TokenId> tokens;
  double log_prob;
  DecoderCursor cursor;
};

double rank_score(const Hypothesis& h, double alpha) {
  if (alpha <= 0 || h.tokens.empty()) return h.log_prob;
  return h.log_prob / std::pow(static_cast<double>(h.tokens.size()), alpha);
}

bool better(const Hypothesis& a, const Hypothesis& b, double alpha) {
  const double sa = rank_score(a, alpha), sb = rank_score(b, alpha);
  if (sa != sb) return sa > sb;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

}  // namespace

DialogueState absorb_context(const DialogueModel& model, std::span<const Utterance> context) {
  if (context.empty()) throw std::invalid_argument("decoding needs at least one context utterance");
  DialogueState s = model.initial_state();
  for (const auto& u : context) s = model.absorb(s, u);
  return s;
}

Hypothesis beam_search(const DialogueModel& model, const DialogueState& state, const BeamConfig& config) {
  if (config.width == 0) throw std::invalid_argument("beam width must be at least 1");
  if (config.max_length == 0) throw std::invalid_argument("maximum decode length must be at least 1");
  const std::size_t vocab = model.config().vocab_size;

  std::vector<Beam> live{Beam{{}, 0.0, model.begin_utterance(state)}};
  std::vector<Hypothesis> finished;
  std::optional<Hypothesis> best;

  for (std::size_t len = 1; len <= config.max_length && !live.empty(); ++len) {
    struct Candidate {
      double log_prob;
      std::size_t beam;
      TokenId token;
    };
    std::vector<Candidate> cands;
    std::vector<DecodeStep> steps;
    steps.reserve(live.size());
    for (std::size_t b = 0; b < live.size(); ++b) {
      steps.push_back(model.step(live[b].cursor));
      const auto lp = steps.back().log_probs.values();
      for (std::size_t v = 0; v < vocab; ++v) {
        cands.push_back({live[b].log_prob + lp[v], b, static_cast<TokenId>(v)});
      }
    }
    const std::size_t keep = std::min(config.width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.beam != b.beam) return a.beam < b.beam;
                        return a.token < b.token;
                      });
    std::vector<Beam> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = cands[i];
      std::vector<TokenId> tokens = live[c.beam].tokens;
      tokens.push_back(c.token);
      const bool eos = c.token == special::kEndOfUtterance;
      if (eos || len == config.max_length) {
        Hypothesis h{std::move(tokens), c.log_prob, eos};
        if (!best || better(h, *best, config.length_penalty)) best = std::move(h);
      } else {
        next.push_back(Beam{std::move(tokens), c.log_prob, DialogueModel::feed(steps[c.beam], c.token)});
      }
    }
    live = std::move(next);
    // Extensions only lower the log-probability, so without a length
    // penalty no live beam can overtake a finished one that already beats it.
    if (best && config.length_penalty <= 0) {
      const double top_live = live.empty() ? -INFINITY : live.front().log_prob;
      if (best->log_prob >= top_live) break;
    }
  }
  return *best;
}

Hypothesis beam_search(const DialogueModel& model, std::span<const Utterance> context, const BeamConfig& config) {
  return beam_search(model, absorb_context(model, context), config);
}

Hypothesis greedy_decode(const DialogueModel& model, const DialogueState& state, std::size_t max_length) {
  BeamConfig c;
  c.width = 1;
  c.max_length = max_length;
  return beam_search(model, state, c);
}

Hypothesis sample(const DialogueModel& model, const DialogueState& state, const SampleConfig& config, Rng& rng) {
  if (!(config.temperature > 0)) throw std::invalid_argument("sampling temperature must be positive");
  if (config.max_length == 0) throw std::invalid_argument("maximum decode length must be at least 1");
  Hypothesis h;
  DecoderCursor cursor = model.begin_utterance(state);
  std::vector<double> weights(model.config().vocab_size);
  while (h.tokens.size() < config.max_length) {
    const DecodeStep step = model.step(cursor);
    const auto lp = step.log_probs.values();
    const double top = *std::max_element(lp.begin(), lp.end());
    double total = 0.0;
    for (std::size_t v = 0; v < lp.size(); ++v) {
      weights[v] = std::exp((lp[v] - top) / config.temperature);
      total += weights[v];
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = 0;
    for (; pick + 1 < weights.size(); ++pick) {
      acc += weights[pick];
      if (u < acc) break;
    }
    // Never land on a zero-weight token through round-off at the end.
    while (weights[pick] == 0.0 && pick > 0) --pick;
    const auto tok = static_cast<TokenId>(pick);
    h.tokens.push_back(tok);
    h.log_prob += lp[pick];
    if (tok == special::kEndOfUtterance) {
      h.finished = true;
      break;
    }
    cursor = DialogueModel::feed(step, tok);
  }
  return h;
}

Hypothesis sample(const DialogueModel& model, std::span<const Utterance> context, const SampleConfig& config,
                  Rng& rng) {
  return sample(model, absorb_context(model, context), config, rng);
}

double score_continuation(const DialogueModel& model, const DialogueState& state, std::span<const TokenId> tokens) {
  DecoderCursor cursor = model.begin_utterance(state);
  double lp = 0.0;
  for (TokenId t : tokens) {
    if (t >= model.config().vocab_size) throw ModelError("token id " + std::to_string(t) + " out of vocabulary range");
    const DecodeStep step = model.step(cursor);
    lp += step.log_probs[t];
    cursor = DialogueModel::feed(step, t);
  }
  return lp;
}

}  // namespace hred
