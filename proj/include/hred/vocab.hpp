#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hred/dialogue.hpp"

namespace hred {

inline constexpr std::size_t kDefaultVocabCap = 10000;

/// Bijective token <-> id map. Ids 0..4 are the reserved tokens; the kept
/// corpus tokens follow in order of decreasing frequency, ties broken
/// lexicographically. Reserved tokens do not count against the cap.
class Vocabulary {
 public:
  /// Counts tokens across all streams and keeps the `cap` most frequent.
  /// Throws std::invalid_argument when cap is 0 or no tokens were given.
  static Vocabulary build(std::span<const std::vector<std::string>> streams,
                          std::size_t cap = kDefaultVocabCap);

  /// Vocabulary holding only the reserved tokens plus `tokens` in order.
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  /// Id of `token`, or <unk> when it is not in the vocabulary.
  TokenId id(const std::string& token) const;
  /// Throws std::out_of_range for an unknown id.
  const std::string& token(TokenId id) const;
  std::uint64_t count(TokenId id) const;

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  /// FNV-1a over the "token<TAB>id" lines; identifies the token<->id mapping.
  std::uint64_t hash() const;

  /// One `token<TAB>id<TAB>count` line per entry, in id order.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  Vocabulary();
  void add(const std::string& token, std::uint64_t count);

  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> ids_;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace hred
