#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hred {

using TokenId = std::uint32_t;

/// Reserved vocabulary ids. These tokens are always present and never count
/// against the vocabulary cap.
namespace special {
inline constexpr TokenId kUnk = 0;
inline constexpr TokenId kPerson = 1;
inline constexpr TokenId kNumber = 2;
inline constexpr TokenId kEndOfUtterance = 3;
inline constexpr TokenId kContinued = 4;
inline constexpr std::size_t kCount = 5;

inline constexpr const char* kUnkText = "<unk>";
inline constexpr const char* kPersonText = "<person>";
inline constexpr const char* kNumberText = "<number>";
inline constexpr const char* kEndOfUtteranceText = "</s>";
inline constexpr const char* kContinuedText = "<c>";
}  // namespace special

/// Token ids of one turn, terminated by the end-of-utterance token.
using Utterance = std::vector<TokenId>;

struct Dialogue {
  std::vector<Utterance> utterances;
  bool operator==(const Dialogue&) const = default;
};

/// A set of encoded dialogues tagged with the hash of the vocabulary that
/// produced them (0 when unknown).
struct Dataset {
  std::vector<Dialogue> dialogues;
  std::uint64_t vocab_hash = 0;
};

inline std::size_t token_count(const Dialogue& d) {
  std::size_t n = 0;
  for (const auto& u : d.utterances) n += u.size();
  return n;
}

}  // namespace hred

namespace hred {

/// Which positions an evaluation covers: every token of the dialogue, or only
/// the tokens of the third utterance (conditioned on the full prefix).
enum class Scope { Full, U3 };

inline constexpr std::size_t kU3Index = 2;

/// Utterances joined into one token stream.
inline std::vector<TokenId> concat(const Dialogue& d) {
  std::vector<TokenId> out;
  out.reserve(token_count(d));
  for (const auto& u : d.utterances) out.insert(out.end(), u.begin(), u.end());
  return out;
}

}  // namespace hred
