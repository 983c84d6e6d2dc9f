#include "hred/detokenize.hpp"

#include <algorithm>

#include "hred/dialogue.hpp"

namespace hred {

namespace {

bool is_closing(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':' || c == ')' || c == ']';
  });
}

bool is_opening(const std::string& t) { return t == "(" || t == "["; }

}  // namespace

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool glue_next = true;
  for (const auto& t : tokens) {
    if (t == special::kEndOfUtteranceText) continue;
    if (t == "'") {
      out += t;
      glue_next = true;
      continue;
    }
    if (!glue_next && !is_closing(t)) out += ' ';
    out += t;
    glue_next = is_opening(t);
  }
  return out;
}

}  // namespace hred
