#include "hred/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hred {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocabulary::Vocabulary() {
  for (const char* t : {special::kUnkText, special::kPersonText, special::kNumberText,
                        special::kEndOfUtteranceText, special::kContinuedText}) {
    add(t, 0);
  }
}

void Vocabulary::add(const std::string& token, std::uint64_t count) {
  if (!ids_.emplace(token, static_cast<TokenId>(tokens_.size())).second) {
    throw std::invalid_argument("duplicate vocabulary token '" + token + "'");
  }
  tokens_.push_back(token);
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> streams, std::size_t cap) {
  if (cap == 0) throw std::invalid_argument("vocabulary cap must be at least 1");
  Vocabulary v;
  std::map<std::string, std::uint64_t> counts;
  std::size_t total = 0;
  for (const auto& stream : streams) {
    for (const auto& tok : stream) {
      ++total;
      auto it = v.ids_.find(tok);
      if (it != v.ids_.end()) {
        ++v.counts_[it->second];
      } else {
        ++counts[tok];
      }
    }
  }
  if (total == 0) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  // std::map iteration is lexicographic, so a stable sort by count keeps ties ordered.
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > cap) ranked.resize(cap);
  for (const auto& [tok, n] : ranked) v.add(tok, n);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t, 0);
  return v;
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? special::kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

std::uint64_t Vocabulary::count(TokenId id) const {
  if (id >= counts_.size()) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return counts_[id];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64("");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    h = fnv1a64(tokens_[i] + "\t" + std::to_string(i) + "\n", h);
  }
  return h;
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
  }
}

Vocabulary Vocabulary::read(std::istream& in) {
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::runtime_error("vocabulary line " + std::to_string(lineno) + ": expected token<TAB>id<TAB>count");
    }
    const std::string tok = line.substr(0, t1);
    std::size_t id = 0;
    std::uint64_t count = 0;
    try {
      id = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
      count = std::stoull(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw std::runtime_error("vocabulary line " + std::to_string(lineno) + ": bad number");
    }
    if (id < special::kCount) {
      if (v.tokens_[id] != tok) {
        throw std::runtime_error("vocabulary line " + std::to_string(lineno) + ": reserved id " +
                                 std::to_string(id) + " must be " + v.tokens_[id]);
      }
      v.counts_[id] = count;
      continue;
    }
    if (id != v.tokens_.size()) {
      throw std::runtime_error("vocabulary line " + std::to_string(lineno) + ": ids must be contiguous");
    }
    v.add(tok, count);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  return read(in);
}

}  // namespace hred
