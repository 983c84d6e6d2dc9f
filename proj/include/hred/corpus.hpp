#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hred/dialogue.hpp"
#include "hred/tokenizer.hpp"
#include "hred/vocab.hpp"

namespace hred {

inline constexpr std::size_t kDefaultTruncationLimit = 80;

struct Turn {
  std::string speaker;
  std::string text;
};

/// Speaker-tagged turns of one scene, in order.
using ScriptDialogue = std::vector<Turn>;

struct Movie {
  std::string name;
  std::vector<ScriptDialogue> dialogues;
};

/// Surface tokens of one utterance, ending in </s>.
using TextUtterance = std::vector<std::string>;
using TextDialogue = std::vector<TextUtterance>;

struct QaPair {
  std::string question;
  std::string answer;
};

/// Parses `SPEAKER<TAB>text` lines; a blank line ends a dialogue.
/// Throws std::runtime_error naming the line when the tab is missing.
Movie read_script(std::istream& in, std::string name);
/// The movie name is the file stem.
Movie load_script(const std::filesystem::path& path);
/// Loads every regular file in `dir`, ordered by file name.
std::vector<Movie> load_scripts(const std::filesystem::path& dir);

/// Parses `Q<TAB>A` lines. A line without a tab is read as a question with an
/// empty answer, which qa_to_dialogues then skips.
std::vector<QaPair> read_qa(std::istream& in);
std::vector<QaPair> load_qa(const std::filesystem::path& path);

/// Consecutive lines by one speaker are merged with <c> between them, then a
/// window slides over the merged turns. A window is kept when its first and
/// third speakers match and differ from the second. Turns that tokenize to
/// nothing are dropped before merging.
std::vector<TextDialogue> make_triples(const ScriptDialogue& dialogue, const Tokenizer& tokenizer);

struct QaConversion {
  std::vector<TextDialogue> dialogues;
  std::size_t skipped = 0;
};

/// Each pair becomes a two-utterance dialogue; pairs whose question or answer
/// tokenizes to nothing are skipped and counted.
QaConversion qa_to_dialogues(std::span<const QaPair> pairs, const Tokenizer& tokenizer);

/// Cuts tokens from the tail of the last utterance, then the one before it,
/// and so on, until the total length is at most `limit`. Every utterance keeps
/// its trailing </s>, and a <c> left directly before </s> is removed as well.
/// Throws std::invalid_argument when limit is smaller than the utterance count.
TextDialogue truncate(const TextDialogue& dialogue, std::size_t limit = kDefaultTruncationLimit);
Dialogue truncate(const Dialogue& dialogue, std::size_t limit = kDefaultTruncationLimit);

struct SplitStats {
  std::size_t dialogues = 0;
  double avg_tokens = 0.0;
  double avg_unk = 0.0;
  std::optional<std::size_t> movies;
};

/// Throws std::invalid_argument for an empty split.
SplitStats stats(const Dataset& split, std::optional<std::size_t> movies = std::nullopt);

/// Encodes surface dialogues; tokens missing from the vocabulary become <unk>.
/// Throws std::invalid_argument when an utterance is empty, does not end in
/// </s>, contains an interior </s>, or ends in <c>.
Dataset encode_dialogues(std::span<const TextDialogue> dialogues, const Vocabulary& vocab);
TextDialogue decode_dialogue(const Dialogue& dialogue, const Vocabulary& vocab);

/// One dialogue per line, utterances joined by a tab, tokens by a space.
void write_dialogues(std::ostream& out, std::span<const TextDialogue> dialogues);
std::vector<TextDialogue> read_dialogues(std::istream& in);
std::vector<TextDialogue> load_dialogues(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab);

struct PreprocessConfig {
  std::size_t vocab_cap = kDefaultVocabCap;
  std::size_t truncation_limit = kDefaultTruncationLimit;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct SplitData {
  std::vector<std::string> movies;
  std::vector<TextDialogue> dialogues;
};

struct PreprocessResult {
  Vocabulary vocab;
  SplitData train;
  SplitData valid;
  SplitData test;
  std::vector<TextDialogue> qa;
  std::size_t qa_skipped = 0;
};

/// Movies are assigned to splits first (seeded shuffle of the name-sorted
/// list), then triples are built and truncated per split. The vocabulary is
/// built from the training triples together with the Q-A dialogues.
PreprocessResult preprocess(std::span<const Movie> movies, std::span<const QaPair> qa,
                            const Tokenizer& tokenizer, const PreprocessConfig& config);

/// Writes train.triples, valid.triples, test.triples, qa.dialogues (when
/// there are Q-A dialogues), vocab.tsv and stats.json into `dir`. Tokens
/// outside the vocabulary are written as <unk>.
void write_preprocessed(const PreprocessResult& result, const std::filesystem::path& dir);

}  // namespace hred
