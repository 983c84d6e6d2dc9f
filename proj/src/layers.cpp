#include "hred/layers.hpp"

#include <stdexcept>

#include "hred/init.hpp"

namespace hred {

void EmbeddingLayer::init(ParamStore& params, Rng& rng) const {
  params[table_name()] = gaussian_init({vocab_size, embed_dim}, kInitStd, rng);
  params[projection_name()] = gaussian_init({hidden_dim, embed_dim}, kInitStd, rng);
}

Var EmbeddingLayer::embed(ParamBinding& bind, TokenId token) const {
  if (token >= vocab_size) {
    throw std::out_of_range("embed: token id " + std::to_string(token) + " >= vocabulary size " +
                            std::to_string(vocab_size));
  }
  Var e = ag::row(bind(table_name()), token);
  return ag::matmul(bind(projection_name()), e);
}

void GruCell::init(ParamStore& params, Rng& rng) const {
  for (const char* g : {"r", "z", "h"}) {
    params[prefix + ".W_" + g] = gaussian_init({state_dim, input_dim}, kInitStd, rng);
    params[prefix + ".U_" + g] = orthogonal_init(state_dim, state_dim, rng);
    params[prefix + ".b_" + g] = gaussian_init({state_dim}, kInitStd, rng);
  }
}

Var GruCell::step(ParamBinding& bind, Var h_prev, Var x) const {
  const Tensor& hv = h_prev.value();
  const Tensor& xv = x.value();
  if (hv.rank() != 1 || hv.size() != state_dim || xv.rank() != 1 || xv.size() != input_dim) {
    throw ShapeError("gru_step(" + prefix + "): expected state [" + std::to_string(state_dim) +
                     "] and input [" + std::to_string(input_dim) + "], got " +
                     shape_string(hv.shape()) + " and " + shape_string(xv.shape()));
  }
  auto gate = [&](const char* g, Var recurrent_in) {
    Var pre = ag::add(ag::matmul(bind(prefix + ".W_" + g), x),
                      ag::matmul(bind(prefix + ".U_" + g), recurrent_in));
    return ag::add(pre, bind(prefix + ".b_" + g));
  };
  Var r = ag::sigmoid(gate("r", h_prev));
  Var z = ag::sigmoid(gate("z", h_prev));
  Var candidate = ag::tanh(gate("h", ag::mul(r, h_prev)));
  // (1 - z) * h + z * h~  ==  h + z * (h~ - h)
  return ag::add(h_prev, ag::mul(z, ag::sub(candidate, h_prev)));
}

void OutputLayer::init(ParamStore& params, Rng& rng) const {
  for (std::size_t k = 0; k < maxout_pieces; ++k) {
    params[name("P" + std::to_string(k))] = gaussian_init({hidden_dim, hidden_dim}, kInitStd, rng);
    params[name("c" + std::to_string(k))] = gaussian_init({hidden_dim}, kInitStd, rng);
  }
  params[name("O")] = gaussian_init({vocab_size, hidden_dim}, kInitStd, rng);
  params[name("b")] = gaussian_init({vocab_size}, kInitStd, rng);
}

Var OutputLayer::logits(ParamBinding& bind, Var h) const {
  const Tensor& hv = h.value();
  if (hv.rank() != 1 || hv.size() != hidden_dim) {
    throw ShapeError("logits: expected state [" + std::to_string(hidden_dim) + "], got " +
                     shape_string(hv.shape()));
  }
  Var features = h;
  if (maxout_pieces > 0) {
    Var best;
    for (std::size_t k = 0; k < maxout_pieces; ++k) {
      const std::string id = std::to_string(k);
      Var piece = ag::add(ag::matmul(bind(name("P" + id)), h), bind(name("c" + id)));
      best = k == 0 ? piece : ag::maximum(best, piece);
    }
    features = best;
  }
  return ag::add(ag::matmul(bind(name("O")), features), bind(name("b")));
}

Var l2_pool(std::span<const Var> states) {
  if (states.empty()) throw std::invalid_argument("l2_pool: empty state list");
  Var acc = ag::square(states[0]);
  for (std::size_t i = 1; i < states.size(); ++i) acc = ag::add(acc, ag::square(states[i]));
  return ag::sqrt(ag::scale(acc, 1.0 / static_cast<double>(states.size())));
}

Tensor embed_value(const EmbeddingLayer& layer, const ParamStore& params, TokenId token) {
  Graph g;
  ParamBinding bind(g, params);
  return layer.embed(bind, token).value();
}

Tensor gru_step_value(const GruCell& cell, const ParamStore& params, const Tensor& h_prev, const Tensor& x) {
  Graph g;
  ParamBinding bind(g, params);
  return cell.step(bind, g.constant(h_prev), g.constant(x)).value();
}

Tensor logits_value(const OutputLayer& layer, const ParamStore& params, const Tensor& h) {
  Graph g;
  ParamBinding bind(g, params);
  return layer.logits(bind, g.constant(h)).value();
}

Tensor l2_pool_value(std::span<const Tensor> states) {
  Graph g;
  std::vector<Var> vars;
  for (const Tensor& s : states) vars.push_back(g.constant(s));
  return l2_pool(vars).value();
}

}  // namespace hred
