#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hred/dialogue.hpp"
#include "hred/model.hpp"

namespace hred {

/// Teacher-forced scores of one dialogue. Errors count positions where the
/// argmax of the model's distribution (lowest id on ties) differs from the
/// true token.
struct DialogueScore {
  double nll = 0.0;
  double nll_u3 = 0.0;
  std::size_t tokens = 0;
  std::size_t tokens_u3 = 0;
  std::size_t errors = 0;
  std::size_t errors_u3 = 0;
};

DialogueScore score_dialogue(const DialogueModel& model, const Dialogue& dialogue);

/// Per-dialogue scores in dataset order. Dialogues are scored on up to
/// `threads` threads (0 = hardware concurrency); the result does not depend
/// on the thread count.
std::vector<DialogueScore> score_dataset(const DialogueModel& model, const Dataset& data, std::size_t threads = 1);

struct EvalReport {
  double ppl = 0.0;
  double ppl_u3 = 0.0;
  double wer = 0.0;
  double wer_u3 = 0.0;
  std::size_t n = 0;
  std::size_t n_w = 0;
  std::size_t n_w_u3 = 0;

  /// {"ppl":..,"ppl_u3":..,"wer":..,"wer_u3":..,"n":..,"n_w":..,"n_w_u3":..};
  /// @U3 fields are null when the data has no third utterances.
  std::string to_json() const;
  /// Fixed-width table: model, perplexity, perplexity @U3, error rate, error rate @U3.
  std::string to_table(const std::string& label) const;
};

/// Sums scores in order. Throws std::invalid_argument for an empty dataset.
EvalReport summarize(const std::vector<DialogueScore>& scores);

/// Throws std::invalid_argument for an empty dataset, or for the U3 scope
/// when no dialogue has a third utterance.
double perplexity(const DialogueModel& model, const Dataset& data, Scope scope, std::size_t threads = 1);
double word_error_rate(const DialogueModel& model, const Dataset& data, Scope scope, std::size_t threads = 1);
EvalReport evaluate(const DialogueModel& model, const Dataset& data, std::size_t threads = 1);

/// Throws std::invalid_argument when a non-zero dataset vocabulary hash
/// differs from a non-zero model vocabulary hash.
void check_vocabulary(const DialogueModel& model, const Dataset& data, const std::string& what);

}  // namespace hred
