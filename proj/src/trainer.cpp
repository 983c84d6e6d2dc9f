#include "hred/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "hred/checkpoint.hpp"
#include "hred/metrics.hpp"

namespace hred {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void save_progress(const std::filesystem::path& path, const DialogueModel& model, const TrainProgress& p,
                   const TrainConfig& config) {
  CheckpointData data{model.config(), model.params(), {}, {}};
  export_adam_state(p.adam, data.state);
  data.state.emplace("train.epoch", Tensor::scalar(static_cast<double>(p.epoch)));
  data.state.emplace("train.step", Tensor::scalar(static_cast<double>(p.step)));
  data.state.emplace("train.best_valid_ppl", Tensor::scalar(p.best_valid_ppl));
  data.state.emplace("train.bad_evals", Tensor::scalar(static_cast<double>(p.bad_evals)));
  for (const auto& [name, t] : p.best_params) data.state.emplace("best/" + name, t);
  data.metadata["seed"] = std::to_string(config.seed);
  data.metadata["epoch"] = std::to_string(p.epoch);
  save_checkpoint(path, data);
}

double scalar_or(const ParamStore& s, const std::string& name, double fallback) {
  auto it = s.find(name);
  return it == s.end() ? fallback : it->second.item();
}

}  // namespace

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::MaxEpochs: return "max-epochs";
    case StopReason::EarlyStopping: return "early-stopping";
    case StopReason::TargetReached: return "target-reached";
    case StopReason::Diverged: return "diverged";
  }
  return "unknown";
}

void batch_gradients(const DialogueModel& model, std::span<const Dialogue* const> batch, GradStore& grads,
                     double& nll, std::size_t& tokens) {
  nll = 0.0;
  tokens = 0;
  for (const Dialogue* d : batch) {
    Graph g;
    ParamBinding bind(g, model.params());
    const auto trace = model.build(bind, *d);
    g.backward(ag::scale(trace.log_likelihood, -1.0 / static_cast<double>(batch.size())));
    bind.accumulate_grads(grads);
    nll -= g.value(trace.log_likelihood).item();
    tokens += trace.positions.size();
  }
}

std::pair<DialogueModel, TrainProgress> load_progress(const std::filesystem::path& path) {
  CheckpointData data = load_checkpoint(path);
  TrainProgress p;
  p.adam = import_adam_state(data.state);
  p.epoch = static_cast<std::size_t>(scalar_or(data.state, "train.epoch", 0));
  p.step = static_cast<std::size_t>(scalar_or(data.state, "train.step", 0));
  p.best_valid_ppl = scalar_or(data.state, "train.best_valid_ppl", kNaN);
  p.bad_evals = static_cast<std::size_t>(scalar_or(data.state, "train.bad_evals", 0));
  for (const auto& [name, t] : data.state) {
    if (name.rfind("best/", 0) == 0) p.best_params.emplace(name.substr(5), t);
  }
  return {DialogueModel(data.config, std::move(data.params)), std::move(p)};
}

TrainResult train(DialogueModel model, const Dataset& train_set, const Dataset& valid_set, const TrainConfig& config,
                  const std::optional<TrainProgress>& resume) {
  if (train_set.dialogues.empty()) throw std::invalid_argument("empty training set");
  if (config.patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (config.valid_every < 1) throw std::invalid_argument("validation frequency must be at least 1");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  check_vocabulary(model, train_set, "training set");
  check_vocabulary(model, valid_set, "validation set");

  std::vector<Dialogue> data;
  data.reserve(train_set.dialogues.size());
  for (const auto& d : train_set.dialogues) {
    model.validate(d);
    data.push_back(truncate(d, config.truncation_limit));
  }
  const Dataset truncated_train{data, train_set.vocab_hash};
  const bool has_valid = !valid_set.dialogues.empty();

  TrainProgress progress = resume.value_or(TrainProgress{0, 0, kNaN, 0, {}, {}});
  if (progress.best_params.empty()) progress.best_params = model.params();

  std::ofstream log_file;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    log_file.open(config.out_dir / "train.log", resume ? std::ios::app : std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot write " + (config.out_dir / "train.log").string());
  }

  TrainResult result{model, model, {}, {}, StopReason::MaxEpochs, progress.best_valid_ppl, progress.epoch,
                     progress.step, {}};
  const Rng root(config.seed);
  double nll_since_log = 0.0;
  std::size_t tokens_since_log = 0;
  ParamStore epoch_start = model.params();
  AdamState adam_start = progress.adam;
  std::size_t epoch_index_start = progress.epoch;
  std::size_t step_start = progress.step;

  auto diverge = [&](const std::string& why) {
    model.params() = epoch_start;
    progress.adam = adam_start;
    progress.epoch = epoch_index_start;
    progress.step = step_start;
    result.reason = StopReason::Diverged;
    result.error = why;
  };

  while (progress.epoch < config.max_epochs) {
    epoch_start = model.params();
    adam_start = progress.adam;
    epoch_index_start = progress.epoch;
    step_start = progress.step;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) {
      Rng rng = root.fork(progress.epoch);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }

    bool diverged = false;
    for (std::size_t start = 0; start < order.size() && !diverged; start += config.batch_size) {
      std::vector<const Dialogue*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&data[order[i]]);
      }
      GradStore grads;
      double nll = 0.0;
      std::size_t tokens = 0;
      try {
        batch_gradients(model, batch, grads, nll, tokens);
      } catch (const NumericError& e) {
        diverge(std::string(e.what()) + " at step " + std::to_string(progress.step + 1));
        diverged = true;
        break;
      }
      if (!std::isfinite(nll)) {
        diverge("non-finite training loss at step " + std::to_string(progress.step + 1));
        diverged = true;
        break;
      }
      try {
        adam_step(model.params(), grads, progress.adam, config.adam, config.freeze);
      } catch (const NonFiniteGradient& e) {
        diverge(e.what());
        diverged = true;
        break;
      }
      ++progress.step;
      nll_since_log += nll;
      tokens_since_log += tokens;
    }
    if (diverged) break;
    ++progress.epoch;

    LogRecord rec{progress.epoch, progress.step,
                  tokens_since_log ? nll_since_log / static_cast<double>(tokens_since_log) : kNaN, kNaN, kNaN};
    bool validated = false;
    bool stop = false;
    if (has_valid && progress.epoch % config.valid_every == 0) {
      validated = true;
      try {
        rec.valid_ppl = evaluate(model, valid_set, config.eval_threads).ppl;
      } catch (const NumericError&) {
        rec.valid_ppl = kNaN;
      }
      if (!std::isfinite(rec.valid_ppl)) {
        diverge("validation perplexity is not finite after epoch " + std::to_string(progress.epoch));
        break;
      }
      if (!(rec.valid_ppl >= progress.best_valid_ppl)) {
        progress.best_valid_ppl = rec.valid_ppl;
        progress.best_params = model.params();
        progress.bad_evals = 0;
        if (!config.out_dir.empty()) save_model(config.out_dir / "best.ckpt", DialogueModel(model.config(), progress.best_params));
      } else if (++progress.bad_evals >= config.patience) {
        result.reason = StopReason::EarlyStopping;
        stop = true;
      }
    }
    if (config.target_train_ppl > 0 && std::exp(rec.train_nll) < 1.25 * config.target_train_ppl) {
      rec.train_ppl = evaluate(model, truncated_train, config.eval_threads).ppl;
      if (rec.train_ppl < config.target_train_ppl) {
        result.reason = StopReason::TargetReached;
        stop = true;
      }
    }
    if (validated || stop || progress.epoch == config.max_epochs || !has_valid) {
      result.log.push_back(rec);
      if (log_file) {
        log_file << rec.step << '\t' << rec.train_nll << '\t' << rec.valid_ppl << '\n' << std::flush;
      }
      if (config.on_log) config.on_log(rec);
      nll_since_log = 0.0;
      tokens_since_log = 0;
    }
    if (!has_valid) progress.best_params = model.params();
    if (!config.out_dir.empty()) save_progress(config.out_dir / "last.ckpt", model, progress, config);
    if (stop) break;
  }

  if (!config.out_dir.empty() && !has_valid) {
    save_model(config.out_dir / "best.ckpt", DialogueModel(model.config(), progress.best_params));
  }
  result.best = DialogueModel(model.config(), progress.best_params);
  result.last = std::move(model);
  result.adam = progress.adam;
  result.best_valid_ppl = progress.best_valid_ppl;
  result.epochs = progress.epoch;
  result.steps = progress.step;
  return result;
}

}  // namespace hred
