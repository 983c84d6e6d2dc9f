#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hred/corpus.hpp"

namespace hred {

/// Seeded templated two-speaker grammar. Generation uses only integer draws,
/// so the output text is identical on every platform for a given config.
struct SyntheticConfig {
  std::size_t movies = 10;
  std::size_t scenes_per_movie = 6;
  std::size_t min_turns = 3;
  std::size_t max_turns = 6;
  /// Chance in percent that a speaker keeps talking for one more line.
  std::uint32_t continuation_percent = 15;
  /// Topics to draw from, as indices into synthetic_topics(); empty = all.
  std::vector<std::size_t> topics;
  std::uint64_t seed = 1;
};

/// Names the topics of the grammar, in index order.
std::vector<std::string> synthetic_topics();
/// Capitalized first names used in the text and as speaker tags.
std::vector<std::string> synthetic_names();

std::vector<Movie> generate_movies(const SyntheticConfig& config);
/// Question/answer pairs drawn from the same grammar.
std::vector<QaPair> generate_qa(std::size_t count, const SyntheticConfig& config);

/// Writes movies/<name>.txt, qa.tsv and gazetteer.txt under `dir`.
void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticConfig& config,
                            std::size_t qa_pairs);

}  // namespace hred
