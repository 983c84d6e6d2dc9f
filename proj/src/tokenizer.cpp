#include "hred/tokenizer.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

#include "hred/dialogue.hpp"

namespace hred {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
// Bytes of multi-byte UTF-8 sequences are treated as word characters.
bool is_word_char(unsigned char c) { return is_alpha(c) || is_digit(c) || c >= 0x80 || c == '_'; }

bool all_digits(const std::string& w) {
  if (w.empty() || !is_digit(static_cast<unsigned char>(w.front()))) return false;
  for (unsigned char c : w)
    if (!is_digit(c) && c != '.' && c != ',') return false;
  return true;
}

constexpr std::array<std::string_view, 5> kReserved{
    special::kUnkText, special::kPersonText, special::kNumberText,
    special::kEndOfUtteranceText, special::kContinuedText};

}  // namespace

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

Tokenizer::Tokenizer(std::unordered_set<std::string> gazetteer) {
  for (const auto& name : gazetteer) gazetteer_.insert(to_lower_ascii(name));
}

Tokenizer Tokenizer::from_gazetteer_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gazetteer " + path.string());
  std::unordered_set<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && is_space(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && is_space(static_cast<unsigned char>(line[start]))) ++start;
    if (start == line.size() || line[start] == '#') continue;
    names.insert(line.substr(start));
  }
  return Tokenizer(std::move(names));
}

std::string Tokenizer::finish_word(const std::string& word) const {
  if (all_digits(word)) return special::kNumberText;
  const auto first = static_cast<unsigned char>(word.front());
  std::string lower = to_lower_ascii(word);
  if (first >= 'A' && first <= 'Z' && gazetteer_.count(lower)) return special::kPersonText;
  return lower;
}

std::vector<std::string> Tokenizer::tokenize(std::string_view line) const {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(finish_word(word));
    word.clear();
  };

  std::size_t i = 0;
  while (i < line.size()) {
    const auto c = static_cast<unsigned char>(line[i]);
    if (is_space(c)) {
      flush();
      ++i;
      continue;
    }
    if (c == '<') {
      bool matched = false;
      for (std::string_view r : kReserved) {
        if (line.substr(i, r.size()) == r) {
          flush();
          out.emplace_back(r);
          i += r.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (is_word_char(c)) {
      word.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    // Decimal point or thousands separator inside a number.
    if ((c == '.' || c == ',') && all_digits(word) && i + 1 < line.size() &&
        is_digit(static_cast<unsigned char>(line[i + 1]))) {
      word.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    flush();
    if (c == '\'') {
      out.emplace_back("'");
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] == line[i]) ++j;
    out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  flush();
  return out;
}

}  // namespace hred
