#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hred/dialogue.hpp"
#include "hred/layers.hpp"
#include "hred/params.hpp"
#include "hred/rng.hpp"

namespace hred {

enum class Variant { RnnLm, Hred, HredBi };
/// How the bidirectional encoder summarizes an utterance.
enum class BiSummary { Concat, L2Pool };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);
std::string summary_name(BiSummary s);
BiSummary parse_summary(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::Hred;
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;    // d_e
  std::size_t hidden_dim = 64;   // encoder and decoder state size
  std::size_t context_dim = 64;  // context RNN state size
  std::size_t maxout_pieces = 2; // 0 disables maxout before the output projection
  BiSummary summary = BiSummary::L2Pool;
  std::uint64_t vocab_hash = 0;

  bool operator==(const ModelConfig&) const = default;
};

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Decoder position: the state before the next GRU step and the token fed
/// into that step (nullopt feeds a zero input vector).
struct DecoderCursor {
  Tensor state;
  std::optional<TokenId> input;
};

/// Output of one decoder step.
struct DecodeStep {
  Tensor state;      // decoder state after the step
  Tensor log_probs;  // log P(next token | everything so far), length |V|
};

/// Dialogue-level state after absorbing some utterances. For the
/// hierarchical variants it is the context RNN state; for the RNN-LM it is
/// the language model cursor over the concatenated history.
struct DialogueState {
  std::size_t turns = 0;
  Tensor context;
  DecoderCursor lm;
};

/// Per-position result of a teacher-forced pass.
struct PositionScore {
  std::size_t utterance = 0;
  std::size_t index = 0;
  TokenId token = 0;
  double log_prob = 0.0;
};

struct ForwardResult {
  double log_likelihood = 0.0;
  std::vector<PositionScore> positions;
  std::vector<Tensor> distributions;  // log-probabilities per position
};

/// RNN-LM, HRED or bidirectional HRED over a shared parameter set.
///
/// Parameter names:
///   embed.E [|V|, d_e], embed.X [d_h, d_e]   shared input embedding
///   enc.*  (hred) / enc.fwd.*, enc.bwd.* (hred-bi)   utterance encoder GRU
///   ctx.*   context GRU, input width d_h (hred) or 2 d_h (hred-bi)
///   bridge.W [d_h, d_ctx], bridge.b [d_h]   context -> decoder init
///   dec.*   decoder GRU (the only recurrent cell of the RNN-LM)
///   out.*   output layer, optional maxout pieces out.P<k>, out.c<k>
class DialogueModel {
 public:
  struct Position {
    std::size_t utterance = 0;
    std::size_t index = 0;
    TokenId token = 0;
    Var log_probs;
  };
  struct Trace {
    Var log_likelihood;
    std::vector<Position> positions;
  };

  DialogueModel(ModelConfig config, ParamStore params);
  static DialogueModel initialize(const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  bool hierarchical() const { return config_.variant != Variant::RnnLm; }

  const EmbeddingLayer& embedding() const { return embedding_; }
  const GruCell& decoder_cell() const { return decoder_; }
  const OutputLayer& output_layer() const { return output_; }

  std::size_t utterance_vector_dim() const;

  // Graph-level building blocks (training and gradient checks).
  Trace build(ParamBinding& bind, const Dialogue& dialogue) const;
  Var encode_utterance(ParamBinding& bind, const Utterance& utterance) const;
  Var advance_context(ParamBinding& bind, Var context, Var utterance_vector) const;
  Var init_decoder(ParamBinding& bind, Var context) const;

  // Value-level API.
  ForwardResult forward(const Dialogue& dialogue) const;
  Tensor encode_utterance(const Utterance& utterance) const;
  Tensor advance_context(const Tensor& context, const Tensor& utterance_vector) const;
  Tensor init_decoder(const Tensor& context) const;

  // Incremental decoding.
  DialogueState initial_state() const;
  DialogueState absorb(const DialogueState& state, const Utterance& utterance) const;
  DecoderCursor begin_utterance(const DialogueState& state) const;
  DecodeStep step(const DecoderCursor& cursor) const;
  static DecoderCursor feed(const DecodeStep& step, TokenId token) { return {step.state, token}; }

  /// Throws ModelError unless the dialogue is non-empty, every token is in
  /// range and every utterance ends with exactly one end-of-utterance token.
  void validate(const Dialogue& dialogue) const;

 private:
  DialogueModel(ModelConfig config, ParamStore params, int /*unchecked*/);
  void setup_layers();
  void require_hierarchical(const char* what) const;
  Var input_vector(ParamBinding& bind, std::optional<TokenId> token) const;

  using EmbedCache = std::unordered_map<TokenId, Var>;
  Var embed_cached(ParamBinding& bind, TokenId token, EmbedCache& cache) const;
  Var encode_impl(ParamBinding& bind, const Utterance& utterance, EmbedCache& cache) const;

  ModelConfig config_;
  ParamStore params_;
  EmbeddingLayer embedding_;
  GruCell encoder_;
  GruCell encoder_bwd_;
  GruCell context_;
  GruCell decoder_;
  OutputLayer output_;
};

}  // namespace hred
