#include "hred/metrics.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <stdexcept>
#include <thread>

namespace hred {

DialogueScore score_dialogue(const DialogueModel& model, const Dialogue& dialogue) {
  const ForwardResult r = model.forward(dialogue);
  DialogueScore s;
  for (std::size_t i = 0; i < r.positions.size(); ++i) {
    const PositionScore& p = r.positions[i];
    const auto values = r.distributions[i].values();
    std::size_t best = 0;
    for (std::size_t v = 1; v < values.size(); ++v)
      if (values[v] > values[best]) best = v;
    const bool wrong = best != p.token;
    s.nll -= p.log_prob;
    ++s.tokens;
    s.errors += wrong;
    if (p.utterance == kU3Index) {
      s.nll_u3 -= p.log_prob;
      ++s.tokens_u3;
      s.errors_u3 += wrong;
    }
  }
  return s;
}

std::vector<DialogueScore> score_dataset(const DialogueModel& model, const Dataset& data, std::size_t threads) {
  std::vector<DialogueScore> out(data.dialogues.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, out.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = score_dialogue(model, data.dialogues[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < out.size();) {
        try {
          out[i] = score_dialogue(model, data.dialogues[i]);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

EvalReport summarize(const std::vector<DialogueScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("evaluation over an empty dataset");
  double nll = 0, nll_u3 = 0;
  std::size_t errors = 0, errors_u3 = 0;
  EvalReport r;
  r.n = scores.size();
  for (const auto& s : scores) {
    nll += s.nll;
    nll_u3 += s.nll_u3;
    r.n_w += s.tokens;
    r.n_w_u3 += s.tokens_u3;
    errors += s.errors;
    errors_u3 += s.errors_u3;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.ppl = std::exp(nll / static_cast<double>(r.n_w));
  r.wer = static_cast<double>(errors) / static_cast<double>(r.n_w);
  r.ppl_u3 = r.n_w_u3 ? std::exp(nll_u3 / static_cast<double>(r.n_w_u3)) : nan;
  r.wer_u3 = r.n_w_u3 ? static_cast<double>(errors_u3) / static_cast<double>(r.n_w_u3) : nan;
  return r;
}

void check_vocabulary(const DialogueModel& model, const Dataset& data, const std::string& what) {
  const auto mh = model.config().vocab_hash;
  if (mh != 0 && data.vocab_hash != 0 && mh != data.vocab_hash) {
    throw std::invalid_argument(what + " was encoded with a different vocabulary than the model");
  }
}

EvalReport evaluate(const DialogueModel& model, const Dataset& data, std::size_t threads) {
  check_vocabulary(model, data, "dataset");
  return summarize(score_dataset(model, data, threads));
}

double perplexity(const DialogueModel& model, const Dataset& data, Scope scope, std::size_t threads) {
  const EvalReport r = evaluate(model, data, threads);
  if (scope == Scope::U3 && r.n_w_u3 == 0) throw std::invalid_argument("no third utterances to evaluate @U3");
  return scope == Scope::Full ? r.ppl : r.ppl_u3;
}

double word_error_rate(const DialogueModel& model, const Dataset& data, Scope scope, std::size_t threads) {
  const EvalReport r = evaluate(model, data, threads);
  if (scope == Scope::U3 && r.n_w_u3 == 0) throw std::invalid_argument("no third utterances to evaluate @U3");
  return scope == Scope::Full ? r.wer : r.wer_u3;
}

std::string EvalReport::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["ppl"] = num(ppl);
  j["ppl_u3"] = num(ppl_u3);
  j["wer"] = num(wer);
  j["wer_u3"] = num(wer_u3);
  j["n"] = n;
  j["n_w"] = n_w;
  j["n_w_u3"] = n_w_u3;
  return j.dump();
}

std::string EvalReport::to_table(const std::string& label) const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-24s %12s %12s %12s %12s\n%-24s %12.4f %12.4f %11.2f%% %11.2f%%\n", "Model", "Perplexity",
                "Perplexity@U3", "Error-Rate", "Error-Rate@U3", label.c_str(), ppl, ppl_u3, 100 * wer, 100 * wer_u3);
  return buf;
}

}  // namespace hred
