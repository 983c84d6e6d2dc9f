#include "hred/session.hpp"

#include <cstdio>
#include <random>

#include "hred/detokenize.hpp"
#include "hred/rng.hpp"

namespace hred {

std::string decode_mode_name(DecodeMode m) { return m == DecodeMode::Map ? "map" : "sample"; }

DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "map") return DecodeMode::Map;
  if (s == "sample") return DecodeMode::Sample;
  throw std::invalid_argument("unknown decode mode '" + s + "' (expected map or sample)");
}

void DecodeSettings::validate() const {
  if (width == 0) throw std::invalid_argument("beam width must be at least 1");
  if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
  if (max_length == 0) throw std::invalid_argument("max_length must be at least 1");
}

SessionManager::SessionManager(std::shared_ptr<const DialogueModel> model, std::shared_ptr<const Vocabulary> vocab,
                               Tokenizer tokenizer, std::chrono::seconds idle_timeout)
    : model_(std::move(model)),
      vocab_(std::move(vocab)),
      tokenizer_(std::move(tokenizer)),
      idle_timeout_(idle_timeout),
      id_salt_(std::random_device{}()) {
  if (!model_ || !vocab_) throw std::invalid_argument("session manager needs a model and a vocabulary");
  if (vocab_->size() != model_->config().vocab_size) {
    throw std::invalid_argument("vocabulary size " + std::to_string(vocab_->size()) + " does not match the model's " +
                                std::to_string(model_->config().vocab_size));
  }
  const auto mh = model_->config().vocab_hash;
  if (mh != 0 && mh != vocab_->hash()) throw std::invalid_argument("vocabulary hash does not match the model");
}

std::string SessionManager::create(const DecodeSettings& settings) {
  settings.validate();
  auto s = std::make_shared<Session>();
  s->state = model_->initial_state();
  s->settings = settings;
  s->last_used = Clock::now();
  std::lock_guard lock(mutex_);
  char buf[40];
  std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(splitmix64(id_salt_ + ++next_id_)));
  sessions_.emplace(buf, std::move(s));
  return buf;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound(id);
  return it->second;
}

ChatResponse SessionManager::chat_turn(const std::string& id, const std::string& text,
                                       const std::optional<DecodeSettings>& override) {
  if (override) override->validate();
  auto s = find(id);
  std::lock_guard lock(s->mutex);

  std::vector<std::string> words;
  for (auto& t : tokenizer_.tokenize(text))
    if (t != special::kEndOfUtteranceText) words.push_back(std::move(t));
  while (!words.empty() && words.back() == special::kContinuedText) words.pop_back();
  if (words.empty()) throw std::invalid_argument("utterance has no tokens");
  Utterance user = vocab_->encode(words);
  user.push_back(special::kEndOfUtterance);

  if (override) s->settings = *override;
  const DecodeSettings& cfg = s->settings;
  const DialogueState after_user = model_->absorb(s->state, user);
  const std::size_t turn_index = s->history.size() + 1;

  Hypothesis h;
  if (cfg.mode == DecodeMode::Map) {
    h = beam_search(*model_, after_user, BeamConfig{cfg.width, cfg.max_length, 0.0});
  } else {
    Rng rng = Rng(cfg.seed).fork(turn_index);
    h = sample(*model_, after_user, SampleConfig{cfg.temperature, cfg.max_length}, rng);
  }

  Utterance reply = h.tokens;
  if (reply.empty() || reply.back() != special::kEndOfUtterance) reply.push_back(special::kEndOfUtterance);
  // Interior </s> cannot occur: decoding stops at the first one.
  s->state = model_->absorb(after_user, reply);
  s->history.push_back(std::move(user));
  s->history.push_back(std::move(reply));
  s->last_used = Clock::now();

  return ChatResponse{detokenize(vocab_->decode(h.tokens)), h.tokens, h.log_prob, s->history.size()};
}

bool SessionManager::remove(const std::string& id) {
  std::lock_guard lock(mutex_);
  return sessions_.erase(id) != 0;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SessionManager::evict_idle(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    if (session_lock.owns_lock() && now - it->second->last_used > idle_timeout_) {
      session_lock.unlock();
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::vector<Utterance> SessionManager::history(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->history;
}

DialogueState SessionManager::state(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->state;
}

DecodeSettings SessionManager::settings(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->settings;
}

}  // namespace hred
