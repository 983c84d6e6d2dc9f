#pragma once

#include <map>
#include <string>
#include <unordered_map>

#include "hred/graph.hpp"
#include "hred/tensor.hpp"

namespace hred {

/// Named trainable tensors, iterated in name order.
using ParamStore = std::map<std::string, Tensor>;
using GradStore = std::map<std::string, Tensor>;

/// Binds a ParamStore into one Graph. Each name becomes exactly one leaf no
/// matter how many times it is requested, so weights shared across time
/// steps and utterances are the same node and their gradients accumulate.
class ParamBinding {
 public:
  ParamBinding(Graph& graph, const ParamStore& store) : graph_(graph), store_(store) {}

  Var operator()(const std::string& name);
  Graph& graph() { return graph_; }
  const ParamStore& store() const { return store_; }
  std::size_t bound_count() const { return bound_.size(); }
  bool is_bound(const std::string& name) const { return bound_.count(name) != 0; }

  /// Adds d(loss)/d(param) of every bound parameter into `out`. Call after
  /// graph().backward(). Parameters the loss never touched are skipped.
  void accumulate_grads(GradStore& out) const;

 private:
  Graph& graph_;
  const ParamStore& store_;
  std::unordered_map<std::string, Var> bound_;
};

}  // namespace hred
