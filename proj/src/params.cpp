#include "hred/params.hpp"

#include <stdexcept>

namespace hred {

Var ParamBinding::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto found = store_.find(name);
  if (found == store_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  Var v = graph_.parameter(found->second);
  bound_.emplace(name, v);
  return v;
}

void ParamBinding::accumulate_grads(GradStore& out) const {
  for (const auto& [name, var] : bound_) {
    if (!graph_.has_grad(var)) continue;
    Tensor g = graph_.grad(var);
    auto it = out.find(name);
    if (it == out.end()) {
      out.emplace(name, std::move(g));
    } else {
      double* d = it->second.data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  }
}

}  // namespace hred
