#pragma once

// Small random datasets and models shared by the unit and acceptance suites.

#include "hred/dialogue.hpp"
#include "hred/model.hpp"
#include "hred/rng.hpp"

namespace hred::testing {

/// Dialogue of `utterances` turns with 1..max_len word tokens drawn from
/// [first_word, vocab) followed by </s>.
inline Dialogue random_dialogue(Rng& rng, std::size_t vocab, std::size_t utterances, std::size_t max_len,
                                TokenId first_word = static_cast<TokenId>(special::kCount)) {
  Dialogue d;
  for (std::size_t u = 0; u < utterances; ++u) {
    Utterance utt;
    const std::size_t len = 1 + rng.uniform_int(max_len);
    for (std::size_t i = 0; i < len; ++i) {
      utt.push_back(static_cast<TokenId>(first_word + rng.uniform_int(vocab - first_word)));
    }
    utt.push_back(special::kEndOfUtterance);
    d.utterances.push_back(std::move(utt));
  }
  return d;
}

inline Dataset random_dataset(Rng& rng, std::size_t n, std::size_t vocab, std::size_t utterances,
                              std::size_t max_len) {
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) ds.dialogues.push_back(random_dialogue(rng, vocab, utterances, max_len));
  return ds;
}

inline ModelConfig small_config(Variant v, std::size_t vocab, std::size_t dh = 8, std::size_t de = 4) {
  ModelConfig c;
  c.variant = v;
  c.vocab_size = vocab;
  c.hidden_dim = dh;
  c.context_dim = dh;
  c.embed_dim = de;
  return c;
}

}  // namespace hred::testing
