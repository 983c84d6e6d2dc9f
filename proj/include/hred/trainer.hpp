#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hred/adam.hpp"
#include "hred/corpus.hpp"
#include "hred/model.hpp"

namespace hred {

struct LogRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  /// Mean per-token negative log-likelihood over the steps since the
  /// previous record, measured while training.
  double train_nll = 0.0;
  /// Validation perplexity; NaN when no validation ran.
  double valid_ppl = 0.0;
  /// Exact training-set perplexity after the epoch; NaN unless a training
  /// perplexity target is set and was checked.
  double train_ppl = 0.0;
};

struct TrainConfig {
  std::size_t max_epochs = 20;
  /// Validation evaluations without improvement before stopping.
  std::size_t patience = 5;
  /// Validate every this many epochs.
  std::size_t valid_every = 1;
  /// Dialogues per optimizer step; the loss is their mean NLL.
  std::size_t batch_size = 1;
  std::size_t truncation_limit = kDefaultTruncationLimit;
  std::uint64_t seed = 1;
  bool shuffle = true;
  AdamConfig adam;
  FreezeSpec freeze;
  /// Stop once the exact training perplexity falls below this; 0 disables.
  double target_train_ppl = 0.0;
  std::size_t eval_threads = 1;
  /// When set: train.log, best.ckpt and last.ckpt are written here.
  std::filesystem::path out_dir;
  std::function<void(const LogRecord&)> on_log;
};

enum class StopReason { MaxEpochs, EarlyStopping, TargetReached, Diverged };
std::string stop_reason_name(StopReason r);

struct TrainResult {
  DialogueModel best;
  DialogueModel last;
  AdamState adam;
  std::vector<LogRecord> log;
  StopReason reason = StopReason::MaxEpochs;
  /// Minimum validation perplexity seen; NaN without validation data.
  double best_valid_ppl = 0.0;
  std::size_t epochs = 0;
  std::size_t steps = 0;
  /// Message when training diverged.
  std::string error;
};

/// Progress restored from a last.ckpt written by train().
struct TrainProgress {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double best_valid_ppl = 0.0;
  std::size_t bad_evals = 0;
  AdamState adam;
  ParamStore best_params;
};

/// Mean-NLL gradient of one batch, added into `grads`. Returns the summed
/// NLL and the token count through the out-parameters.
void batch_gradients(const DialogueModel& model, std::span<const Dialogue* const> batch, GradStore& grads,
                     double& nll, std::size_t& tokens);

/// Minimizes the dialogue negative log-likelihood with Adam, one seeded
/// shuffle per epoch. Validation perplexity is computed every `valid_every`
/// epochs; training stops after `patience` evaluations without improvement
/// and `best` holds the parameters with the lowest validation perplexity.
/// Throws std::invalid_argument for an empty training set or mismatched
/// vocabularies.
TrainResult train(DialogueModel model, const Dataset& train_set, const Dataset& valid_set, const TrainConfig& config,
                  const std::optional<TrainProgress>& resume = std::nullopt);

/// Loads model and progress from a last.ckpt written by train().
std::pair<DialogueModel, TrainProgress> load_progress(const std::filesystem::path& path);

}  // namespace hred
