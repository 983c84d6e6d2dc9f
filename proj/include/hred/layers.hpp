#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hred/dialogue.hpp"
#include "hred/params.hpp"
#include "hred/rng.hpp"

namespace hred {

inline constexpr double kInitStd = 0.01;

/// Low-rank input embedding: the input vector of token j is X * E[j].
///
/// E is stored token-major, shape [|V|, d_e], so a lookup is one contiguous
/// row. X has shape [d_h, d_e].
struct EmbeddingLayer {
  std::string prefix = "embed";
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 0;   // d_e
  std::size_t hidden_dim = 0;  // d_h

  std::string table_name() const { return prefix + ".E"; }
  std::string projection_name() const { return prefix + ".X"; }

  void init(ParamStore& params, Rng& rng) const;
  Var embed(ParamBinding& bind, TokenId token) const;
};

/// Gated recurrent unit:
///   r  = sigmoid(W_r x + U_r h + b_r)
///   z  = sigmoid(W_z x + U_z h + b_z)
///   h~ = tanh(W_h x + U_h (r * h) + b_h)
///   h' = (1 - z) * h + z * h~
struct GruCell {
  std::string prefix;
  std::size_t input_dim = 0;
  std::size_t state_dim = 0;

  std::string name(const char* part) const { return prefix + "." + part; }
  /// U_* orthogonal, W_* and biases Gaussian.
  void init(ParamStore& params, Rng& rng) const;
  Var step(ParamBinding& bind, Var h_prev, Var x) const;
};

/// Logits over the vocabulary from a decoder state. Without maxout the
/// logits are O h + b. With maxout(k) the state first goes through
/// m_i = max_j (P_j h + c_j)_i, then O m + b. O is stored [|V|, d_h].
struct OutputLayer {
  std::string prefix = "out";
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 0;
  std::size_t maxout_pieces = 0;  // 0 disables maxout

  std::string name(const std::string& part) const { return prefix + "." + part; }
  void init(ParamStore& params, Rng& rng) const;
  Var logits(ParamBinding& bind, Var h) const;
};

/// Elementwise sqrt(1/N sum_n h_n^2) over a non-empty list of states.
Var l2_pool(std::span<const Var> states);

/// Tensor-level convenience wrappers, each evaluated on a throwaway graph.
Tensor embed_value(const EmbeddingLayer& layer, const ParamStore& params, TokenId token);
Tensor gru_step_value(const GruCell& cell, const ParamStore& params, const Tensor& h_prev, const Tensor& x);
Tensor logits_value(const OutputLayer& layer, const ParamStore& params, const Tensor& h);
Tensor l2_pool_value(std::span<const Tensor> states);

}  // namespace hred
