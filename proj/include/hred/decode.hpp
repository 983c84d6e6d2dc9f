#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hred/model.hpp"
#include "hred/rng.hpp"

namespace hred {

inline constexpr std::size_t kDefaultMaxDecodeLength = 40;

struct Hypothesis {
  std::vector<TokenId> tokens;
  /// Sum of the model's log-probabilities of `tokens`.
  double log_prob = 0.0;
  /// True when the last token is </s>; false when the length cap ended it.
  bool finished = false;
};

struct BeamConfig {
  std::size_t width = 5;
  std::size_t max_length = kDefaultMaxDecodeLength;
  /// Optional extension, off by default: rank finished hypotheses by
  /// log_prob / length^alpha. Raw log-probability when 0.
  double length_penalty = 0.0;
};

struct SampleConfig {
  double temperature = 1.0;
  std::size_t max_length = kDefaultMaxDecodeLength;
};

/// Absorbs the context utterances. Throws std::invalid_argument for an empty
/// context and ModelError for out-of-vocabulary tokens or a missing </s>.
DialogueState absorb_context(const DialogueModel& model, std::span<const Utterance> context);

/// Beam search over the next utterance. Each step keeps the `width` best
/// extensions of the live hypotheses; an extension ending in </s> is
/// finished, and at `max_length` tokens the rest are finished by force.
/// Returns the finished hypothesis with the highest score (ties: shorter,
/// then lexicographically smaller). Throws std::invalid_argument for
/// width 0 or max_length 0.
Hypothesis beam_search(const DialogueModel& model, const DialogueState& state, const BeamConfig& config);
Hypothesis beam_search(const DialogueModel& model, std::span<const Utterance> context, const BeamConfig& config);

/// Beam search with width 1.
Hypothesis greedy_decode(const DialogueModel& model, const DialogueState& state,
                         std::size_t max_length = kDefaultMaxDecodeLength);

/// Ancestral sampling from softmax(log P / temperature). The returned
/// log_prob is under the untempered model. Throws std::invalid_argument for
/// a non-positive temperature.
Hypothesis sample(const DialogueModel& model, const DialogueState& state, const SampleConfig& config, Rng& rng);
Hypothesis sample(const DialogueModel& model, std::span<const Utterance> context, const SampleConfig& config,
                  Rng& rng);

/// Log-probability of `tokens` as the next utterance after `state`.
double score_continuation(const DialogueModel& model, const DialogueState& state, std::span<const TokenId> tokens);

}  // namespace hred
