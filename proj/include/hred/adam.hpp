#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "hred/params.hpp"

namespace hred {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 0.0;
};

/// Parameters excluded from updates: whole tensors by name, or single rows
/// of a matrix (for example embedding rows of tokens loaded from a file).
struct FreezeSpec {
  std::set<std::string> params;
  std::map<std::string, std::set<std::size_t>> rows;

  bool frozen(const std::string& name) const { return params.count(name) != 0; }
  bool row_frozen(const std::string& name, std::size_t row) const;
  bool empty() const { return params.empty() && rows.empty(); }
};

struct AdamState {
  std::size_t t = 0;
  ParamStore m;
  ParamStore v;
};

/// A gradient with a NaN or infinity; the step is aborted before anything
/// is modified.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient for parameter '" + param + "'"), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

/// One bias-corrected Adam update. Parameters without a gradient entry are
/// treated as having a zero gradient. Frozen tensors and rows keep their
/// values and moments exactly. `t` increments by one per call.
void adam_step(ParamStore& params, const GradStore& grads, AdamState& state, const AdamConfig& config,
               const FreezeSpec& freeze = {});

/// Stores moments as "adam.m/<name>", "adam.v/<name>" and the step counter
/// as "adam.t".
void export_adam_state(const AdamState& state, ParamStore& out);
AdamState import_adam_state(const ParamStore& in);

}  // namespace hred
