#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace hred {

/// Rule-based tokenizer for movie-script text.
///
/// - ASCII letters are lowercased.
/// - A token made only of digits (optionally with inner `.`/`,` groups such
///   as 3.5 or 1,000) becomes <number>.
/// - A capitalized word whose lowercase form is in the gazetteer becomes
///   <person>.
/// - Apostrophes are split off as their own token: "don't" -> don ' t.
/// - Other punctuation is split off; runs of one repeated mark ("...",
///   "!!", "--") stay together.
/// - Reserved tokens written literally (<unk>, <person>, <number>, </s>, <c>)
///   pass through unchanged.
class Tokenizer {
 public:
  Tokenizer() = default;
  explicit Tokenizer(std::unordered_set<std::string> gazetteer);

  /// One name per line; blank lines and lines starting with '#' are ignored.
  static Tokenizer from_gazetteer_file(const std::filesystem::path& path);

  std::vector<std::string> tokenize(std::string_view line) const;
  const std::unordered_set<std::string>& gazetteer() const { return gazetteer_; }

 private:
  std::string finish_word(const std::string& word) const;
  std::unordered_set<std::string> gazetteer_;
};

std::string to_lower_ascii(std::string_view s);

}  // namespace hred
