#include "hred/adam.hpp"

#include <cmath>

namespace hred {

bool FreezeSpec::row_frozen(const std::string& name, std::size_t row) const {
  auto it = rows.find(name);
  return it != rows.end() && it->second.count(row) != 0;
}

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state, const AdamConfig& config,
               const FreezeSpec& freeze) {
  for (const auto& [name, g] : grads) {
    auto p = params.find(name);
    if (p == params.end()) throw std::invalid_argument("gradient for unknown parameter '" + name + "'");
    if (g.shape() != p->second.shape()) throw std::invalid_argument("gradient shape mismatch for '" + name + "'");
    if (!g.all_finite()) throw NonFiniteGradient(name);
  }

  double scale = 1.0;
  if (config.clip_norm > 0) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
      if (freeze.frozen(name)) continue;
      const std::size_t cols = g.rank() == 2 ? g.cols() : g.size();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!freeze.row_frozen(name, i / cols)) sq += g[i] * g[i];
      }
    }
    const double norm = std::sqrt(sq);
    if (norm > config.clip_norm) scale = config.clip_norm / norm;
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, p] : params) {
    if (freeze.frozen(name)) continue;
    auto m_it = state.m.try_emplace(name, Tensor::zeros_like(p)).first;
    auto v_it = state.v.try_emplace(name, Tensor::zeros_like(p)).first;
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    auto g_it = grads.find(name);
    const Tensor* g = g_it == grads.end() ? nullptr : &g_it->second;
    const std::size_t cols = p.rank() == 2 ? p.cols() : p.size();
    const bool has_rows = freeze.rows.count(name) != 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (has_rows && freeze.row_frozen(name, i / cols)) continue;
      const double gi = g ? (*g)[i] * scale : 0.0;
      m[i] = config.beta1 * m[i] + (1 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1 - config.beta2) * gi * gi;
      p[i] -= config.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.eps);
    }
  }
}

void export_adam_state(const AdamState& state, ParamStore& out) {
  out.insert_or_assign("adam.t", Tensor::scalar(static_cast<double>(state.t)));
  for (const auto& [name, m] : state.m) out.insert_or_assign("adam.m/" + name, m);
  for (const auto& [name, v] : state.v) out.insert_or_assign("adam.v/" + name, v);
}

AdamState import_adam_state(const ParamStore& in) {
  AdamState s;
  auto t = in.find("adam.t");
  if (t != in.end()) s.t = static_cast<std::size_t>(t->second.item());
  for (const auto& [name, tensor] : in) {
    if (name.rfind("adam.m/", 0) == 0) s.m.emplace(name.substr(7), tensor);
    if (name.rfind("adam.v/", 0) == 0) s.v.emplace(name.substr(7), tensor);
  }
  return s;
}

}  // namespace hred
