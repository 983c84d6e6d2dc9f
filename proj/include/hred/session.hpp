#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hred/decode.hpp"
#include "hred/model.hpp"
#include "hred/tokenizer.hpp"
#include "hred/vocab.hpp"

namespace hred {

enum class DecodeMode { Map, Sample };
std::string decode_mode_name(DecodeMode m);
/// Accepts "map" and "sample".
DecodeMode parse_decode_mode(const std::string& s);

struct DecodeSettings {
  DecodeMode mode = DecodeMode::Map;
  std::size_t width = 5;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_length = kDefaultMaxDecodeLength;

  /// Throws std::invalid_argument for width 0, a non-positive temperature or
  /// max_length 0.
  void validate() const;
};

struct ChatResponse {
  std::string text;
  std::vector<TokenId> token_ids;
  double log_prob = 0.0;
  /// Number of utterances in the session history after this turn.
  std::size_t turn = 0;
};

class SessionNotFound : public std::out_of_range {
 public:
  explicit SessionNotFound(const std::string& id) : std::out_of_range("unknown session '" + id + "'") {}
};

/// In-memory chat sessions over one immutable model. Each session holds its
/// utterance history, the dialogue state after that history and its decode
/// settings. Calls on different sessions run concurrently; calls on one
/// session are serialized.
class SessionManager {
 public:
  using Clock = std::chrono::steady_clock;

  SessionManager(std::shared_ptr<const DialogueModel> model, std::shared_ptr<const Vocabulary> vocab,
                 Tokenizer tokenizer, std::chrono::seconds idle_timeout = std::chrono::minutes(30));

  std::string create(const DecodeSettings& settings = {});
  /// Tokenizes and encodes `text`, absorbs it, decodes a reply with the
  /// session settings (or `override`, which then becomes the session's
  /// settings), absorbs the reply and returns it. Throws SessionNotFound,
  /// or std::invalid_argument for text with no tokens.
  ChatResponse chat_turn(const std::string& id, const std::string& text,
                         const std::optional<DecodeSettings>& override = std::nullopt);
  bool remove(const std::string& id);
  std::size_t size() const;
  /// Drops sessions idle for longer than the timeout; returns how many.
  std::size_t evict_idle(Clock::time_point now = Clock::now());

  std::vector<Utterance> history(const std::string& id) const;
  DialogueState state(const std::string& id) const;
  DecodeSettings settings(const std::string& id) const;

  const DialogueModel& model() const { return *model_; }
  const Vocabulary& vocab() const { return *vocab_; }

 private:
  struct Session {
    std::mutex mutex;
    std::vector<Utterance> history;
    DialogueState state;
    DecodeSettings settings;
    Clock::time_point last_used;
  };
  std::shared_ptr<Session> find(const std::string& id) const;

  std::shared_ptr<const DialogueModel> model_;
  std::shared_ptr<const Vocabulary> vocab_;
  Tokenizer tokenizer_;
  std::chrono::seconds idle_timeout_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
  std::uint64_t id_salt_;
};

}  // namespace hred
