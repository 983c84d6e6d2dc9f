#include "hred/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "hred/init.hpp"

namespace hred {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::RnnLm: return "rnn-lm";
    case Variant::Hred: return "hred";
    case Variant::HredBi: return "hred-bi";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  if (s == "rnn-lm") return Variant::RnnLm;
  if (s == "hred") return Variant::Hred;
  if (s == "hred-bi") return Variant::HredBi;
  throw std::invalid_argument("unknown model variant '" + s + "' (expected rnn-lm, hred or hred-bi)");
}

std::string summary_name(BiSummary s) { return s == BiSummary::Concat ? "concat" : "l2pool"; }

BiSummary parse_summary(const std::string& s) {
  if (s == "concat") return BiSummary::Concat;
  if (s == "l2pool") return BiSummary::L2Pool;
  throw std::invalid_argument("unknown bidirectional summary '" + s + "' (expected concat or l2pool)");
}

namespace {

void check_config(const ModelConfig& c) {
  if (c.vocab_size == 0 || c.embed_dim == 0 || c.hidden_dim == 0 || c.context_dim == 0) {
    throw ModelError("model dimensions and vocabulary size must be positive");
  }
  if (c.vocab_size <= special::kEndOfUtterance) {
    throw ModelError("vocabulary too small to hold the end-of-utterance token");
  }
  if (c.maxout_pieces == 1) throw ModelError("maxout needs at least 2 pieces (0 disables it)");
}

}  // namespace

void DialogueModel::setup_layers() {
  const ModelConfig& c = config_;
  embedding_ = EmbeddingLayer{"embed", c.vocab_size, c.embed_dim, c.hidden_dim};
  decoder_ = GruCell{"dec", c.hidden_dim, c.hidden_dim};
  output_ = OutputLayer{"out", c.vocab_size, c.hidden_dim, c.maxout_pieces};
  if (c.variant == Variant::Hred) {
    encoder_ = GruCell{"enc", c.hidden_dim, c.hidden_dim};
  } else if (c.variant == Variant::HredBi) {
    encoder_ = GruCell{"enc.fwd", c.hidden_dim, c.hidden_dim};
    encoder_bwd_ = GruCell{"enc.bwd", c.hidden_dim, c.hidden_dim};
  }
  if (hierarchical()) context_ = GruCell{"ctx", utterance_vector_dim(), c.context_dim};
}

std::size_t DialogueModel::utterance_vector_dim() const {
  return config_.variant == Variant::HredBi ? 2 * config_.hidden_dim : config_.hidden_dim;
}

DialogueModel DialogueModel::initialize(const ModelConfig& config, Rng& rng) {
  check_config(config);
  DialogueModel shell(config, ParamStore{}, /*unchecked*/ 0);
  ParamStore p;
  shell.embedding_.init(p, rng);
  if (shell.hierarchical()) {
    shell.encoder_.init(p, rng);
    if (config.variant == Variant::HredBi) shell.encoder_bwd_.init(p, rng);
    shell.context_.init(p, rng);
    p["bridge.W"] = gaussian_init({config.hidden_dim, config.context_dim}, kInitStd, rng);
    p["bridge.b"] = gaussian_init({config.hidden_dim}, kInitStd, rng);
  }
  shell.decoder_.init(p, rng);
  shell.output_.init(p, rng);
  return DialogueModel(config, std::move(p));
}

DialogueModel::DialogueModel(ModelConfig config, ParamStore params, int)
    : config_(std::move(config)), params_(std::move(params)) {
  setup_layers();
}

DialogueModel::DialogueModel(ModelConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  check_config(config_);
  setup_layers();
  // Compare against the layout a fresh initialization would produce.
  Rng scratch(0);
  ModelConfig probe = config_;
  DialogueModel shell(probe, ParamStore{}, 0);
  ParamStore expected;
  shell.embedding_.init(expected, scratch);
  if (hierarchical()) {
    shell.encoder_.init(expected, scratch);
    if (config_.variant == Variant::HredBi) shell.encoder_bwd_.init(expected, scratch);
    shell.context_.init(expected, scratch);
    expected["bridge.W"] = Tensor({config_.hidden_dim, config_.context_dim});
    expected["bridge.b"] = Tensor({config_.hidden_dim});
  }
  shell.decoder_.init(expected, scratch);
  shell.output_.init(expected, scratch);
  for (const auto& [name, t] : expected) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ModelError("missing parameter '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw ModelError("parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                       ", expected " + shape_string(t.shape()));
    }
  }
  for (const auto& [name, t] : params_) {
    if (!expected.count(name)) throw ModelError("unexpected parameter '" + name + "'");
  }
}

void DialogueModel::require_hierarchical(const char* what) const {
  if (!hierarchical()) throw ModelError(std::string(what) + " is not defined for the rnn-lm variant");
}

void DialogueModel::validate(const Dialogue& dialogue) const {
  if (dialogue.utterances.empty()) throw ModelError("empty dialogue");
  for (std::size_t m = 0; m < dialogue.utterances.size(); ++m) {
    const Utterance& u = dialogue.utterances[m];
    if (u.empty() || u.back() != special::kEndOfUtterance) {
      throw ModelError("utterance " + std::to_string(m) + " does not end with the end-of-utterance token");
    }
    for (std::size_t n = 0; n < u.size(); ++n) {
      if (u[n] >= config_.vocab_size) {
        throw ModelError("token id " + std::to_string(u[n]) + " out of vocabulary range");
      }
      if (n + 1 < u.size() && u[n] == special::kEndOfUtterance) {
        throw ModelError("utterance " + std::to_string(m) + " has an interior end-of-utterance token");
      }
    }
  }
}

Var DialogueModel::embed_cached(ParamBinding& bind, TokenId token, EmbedCache& cache) const {
  if (auto it = cache.find(token); it != cache.end()) return it->second;
  Var v = embedding_.embed(bind, token);
  cache.emplace(token, v);
  return v;
}

Var DialogueModel::input_vector(ParamBinding& bind, std::optional<TokenId> token) const {
  if (!token) return bind.graph().constant(Tensor({config_.hidden_dim}));
  return embedding_.embed(bind, *token);
}

Var DialogueModel::encode_impl(ParamBinding& bind, const Utterance& utterance, EmbedCache& cache) const {
  require_hierarchical("encode_utterance");
  if (utterance.empty()) throw ModelError("encode_utterance: empty utterance");
  Graph& g = bind.graph();
  std::vector<Var> inputs;
  inputs.reserve(utterance.size());
  for (TokenId t : utterance) inputs.push_back(embed_cached(bind, t, cache));

  const Tensor zero({config_.hidden_dim});
  std::vector<Var> forward_states;
  Var h = g.constant(zero);
  for (Var x : inputs) {
    h = encoder_.step(bind, h, x);
    forward_states.push_back(h);
  }
  if (config_.variant == Variant::Hred) return h;

  std::vector<Var> backward_states;
  Var hb = g.constant(zero);
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) {
    hb = encoder_bwd_.step(bind, hb, *it);
    backward_states.push_back(hb);
  }
  if (config_.summary == BiSummary::Concat) return ag::concat(h, hb);
  return ag::concat(l2_pool(forward_states), l2_pool(backward_states));
}

Var DialogueModel::encode_utterance(ParamBinding& bind, const Utterance& utterance) const {
  EmbedCache cache;
  return encode_impl(bind, utterance, cache);
}

Var DialogueModel::advance_context(ParamBinding& bind, Var context, Var utterance_vector) const {
  require_hierarchical("advance_context");
  if (utterance_vector.value().size() != utterance_vector_dim()) {
    throw ShapeError("advance_context: utterance vector has " +
                     std::to_string(utterance_vector.value().size()) + " entries, context input width is " +
                     std::to_string(utterance_vector_dim()));
  }
  return context_.step(bind, context, utterance_vector);
}

Var DialogueModel::init_decoder(ParamBinding& bind, Var context) const {
  require_hierarchical("init_decoder");
  return ag::tanh(ag::add(ag::matmul(bind("bridge.W"), context), bind("bridge.b")));
}

DialogueModel::Trace DialogueModel::build(ParamBinding& bind, const Dialogue& dialogue) const {
  validate(dialogue);
  Graph& g = bind.graph();
  EmbedCache cache;
  Trace trace;
  std::vector<Var> picked;
  const Tensor zero_input({config_.hidden_dim});

  auto decode_utterance = [&](std::size_t m, Var& h, std::optional<Var>& pending_input) {
    const Utterance& u = dialogue.utterances[m];
    for (std::size_t n = 0; n < u.size(); ++n) {
      Var x = pending_input ? *pending_input : g.constant(zero_input);
      h = decoder_.step(bind, h, x);
      Var lp = ag::log_softmax(output_.logits(bind, h));
      picked.push_back(ag::pick(lp, u[n]));
      trace.positions.push_back(Position{m, n, u[n], lp});
      pending_input = embed_cached(bind, u[n], cache);
    }
  };

  if (!hierarchical()) {
    Var h = g.constant(Tensor({config_.hidden_dim}));
    std::optional<Var> pending;
    for (std::size_t m = 0; m < dialogue.utterances.size(); ++m) decode_utterance(m, h, pending);
  } else {
    Var context = g.constant(Tensor({config_.context_dim}));
    for (std::size_t m = 0; m < dialogue.utterances.size(); ++m) {
      Var h = init_decoder(bind, context);
      std::optional<Var> pending;
      decode_utterance(m, h, pending);
      if (m + 1 < dialogue.utterances.size()) {
        context = advance_context(bind, context, encode_impl(bind, dialogue.utterances[m], cache));
      }
    }
  }
  trace.log_likelihood = ag::sum(ag::concat(picked));
  return trace;
}

ForwardResult DialogueModel::forward(const Dialogue& dialogue) const {
  Graph g;
  ParamBinding bind(g, params_);
  Trace trace = build(bind, dialogue);
  ForwardResult out;
  out.log_likelihood = trace.log_likelihood.value().item();
  out.positions.reserve(trace.positions.size());
  out.distributions.reserve(trace.positions.size());
  for (const Position& p : trace.positions) {
    const Tensor& lp = p.log_probs.value();
    out.positions.push_back(PositionScore{p.utterance, p.index, p.token, lp[p.token]});
    out.distributions.push_back(lp);
  }
  return out;
}

Tensor DialogueModel::encode_utterance(const Utterance& utterance) const {
  Graph g;
  ParamBinding bind(g, params_);
  return encode_utterance(bind, utterance).value();
}

Tensor DialogueModel::advance_context(const Tensor& context, const Tensor& utterance_vector) const {
  Graph g;
  ParamBinding bind(g, params_);
  return advance_context(bind, g.constant(context), g.constant(utterance_vector)).value();
}

Tensor DialogueModel::init_decoder(const Tensor& context) const {
  Graph g;
  ParamBinding bind(g, params_);
  return init_decoder(bind, g.constant(context)).value();
}

DialogueState DialogueModel::initial_state() const {
  DialogueState s;
  if (hierarchical()) {
    s.context = Tensor({config_.context_dim});
  } else {
    s.lm = DecoderCursor{Tensor({config_.hidden_dim}), std::nullopt};
  }
  return s;
}

DialogueState DialogueModel::absorb(const DialogueState& state, const Utterance& utterance) const {
  validate(Dialogue{{utterance}});
  DialogueState next = state;
  next.turns += 1;
  if (hierarchical()) {
    next.context = advance_context(state.context, encode_utterance(utterance));
    return next;
  }
  // Run the language model through the tokens; predictions are discarded.
  Graph g;
  ParamBinding bind(g, params_);
  Var h = g.constant(state.lm.state);
  std::optional<TokenId> input = state.lm.input;
  for (TokenId t : utterance) {
    h = decoder_.step(bind, h, input_vector(bind, input));
    input = t;
  }
  next.lm = DecoderCursor{h.value(), input};
  return next;
}

DecoderCursor DialogueModel::begin_utterance(const DialogueState& state) const {
  if (!hierarchical()) return state.lm;
  return DecoderCursor{init_decoder(state.context), std::nullopt};
}

DecodeStep DialogueModel::step(const DecoderCursor& cursor) const {
  if (cursor.input && *cursor.input >= config_.vocab_size) {
    throw ModelError("token id " + std::to_string(*cursor.input) + " out of vocabulary range");
  }
  Graph g;
  ParamBinding bind(g, params_);
  Var h = decoder_.step(bind, g.constant(cursor.state), input_vector(bind, cursor.input));
  Var lp = ag::log_softmax(output_.logits(bind, h));
  return DecodeStep{h.value(), lp.value()};
}

}  // namespace hred
