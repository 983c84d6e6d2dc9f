#pragma once

#include <span>
#include <string>
#include <vector>

namespace hred {

/// Joins surface tokens into display text: </s> is dropped, closing
/// punctuation attaches to the preceding word, an apostrophe joins its
/// neighbours ("don ' t" -> "don't"), and an opening bracket attaches to
/// the following word. Placeholders such as <person> are kept as written.
/// The inverse of tokenization is lossy (case, names and numbers are gone).
std::string detokenize(std::span<const std::string> tokens);

}  // namespace hred
