#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hred/dialogue.hpp"

namespace hred {

enum class Smoothing { Backoff, WittenBell, Absolute, ModifiedKn };

std::string smoothing_name(Smoothing s);
/// Accepts "backoff", "witten-bell", "absolute", "modified-kn".
Smoothing parse_smoothing(const std::string& name);

inline constexpr std::size_t kMaxNgramOrder = 5;
inline constexpr double kBackoffFactor = 0.4;

using Ngram = std::vector<TokenId>;

/// Raw n-gram counts for orders 1..n. Each dialogue is one token stream (its
/// utterances concatenated); no n-gram spans two dialogues, and near the start
/// of a stream only the shorter n-grams that fit are counted.
class CountTable {
 public:
  explicit CountTable(std::size_t order);

  static CountTable count(const Dataset& corpus, std::size_t order);

  void add_stream(std::span<const TokenId> stream);
  /// Adds `n` occurrences of one n-gram (length 1..order).
  void add(const Ngram& ngram, std::uint64_t n);

  std::size_t order() const { return counts_.size(); }
  /// Raw count of the n-gram (context followed by token); 0 when unseen.
  std::uint64_t count(std::span<const TokenId> ngram) const;
  /// All n-grams of length k (1..order) with their counts, in sorted order.
  const std::map<Ngram, std::uint64_t>& ngrams(std::size_t k) const;
  bool empty() const { return counts_.front().empty(); }
  /// Unsmoothed c(context, token) / sum_v c(context, v); 0 for an unseen
  /// context. The context must be shorter than the order.
  double mle(std::span<const TokenId> context, TokenId token) const;
  std::uint64_t total_tokens() const;

  bool operator==(const CountTable&) const = default;

 private:
  std::vector<std::map<Ngram, std::uint64_t>> counts_;
};

/// Interpolated or backed-off n-gram model over a fixed vocabulary.
///
/// - Backoff: seen successors of a context share 1 - 0.4 of the mass in
///   proportion to their counts; the remaining 0.4 goes to unseen tokens in
///   proportion to the next-shorter context's distribution.
/// - Witten-Bell: P = (c(h,v) + T(h) P'(v)) / (c(h) + T(h)).
/// - Absolute: P = max(c(h,v) - D, 0) / c(h) + D T(h) / c(h) P'(v), with one D
///   per order from count-of-counts, D = n1 / (n1 + 2 n2).
/// - Modified Kneser-Ney: three discounts per order, lower orders use
///   continuation counts.
/// Unseen contexts fall through to the shorter context; below the unigram
/// level every method uses the uniform 1/|V| distribution.
class NgramModel {
 public:
  NgramModel(CountTable counts, Smoothing method, std::size_t vocab_size, std::uint64_t vocab_hash = 0);

  /// Only the last order-1 context tokens are used. Throws std::logic_error
  /// when the model has no counts, std::out_of_range for an out-of-vocabulary
  /// token.
  double prob(std::span<const TokenId> context, TokenId token) const;
  double log_prob(std::span<const TokenId> context, TokenId token) const;

  std::size_t order() const { return counts_.order(); }
  Smoothing method() const { return method_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  const CountTable& counts() const { return counts_; }
  /// Discounts of n-grams of length k: {D} for absolute, {D1, D2, D3+} for
  /// modified Kneser-Ney, empty otherwise.
  std::vector<double> discounts(std::size_t k) const;

  /// First line `order<TAB>method<TAB>params`, where params are
  /// `key=value` pairs separated by spaces (format version, vocabulary size
  /// and hash). Then one line per n-gram: token ids separated by spaces, a
  /// tab, the count.
  void write(std::ostream& out) const;
  static NgramModel read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static NgramModel load(const std::filesystem::path& path);

 private:
  struct Context {
    std::map<TokenId, std::uint64_t> next;
    std::uint64_t total = 0;
    std::array<std::uint64_t, 3> n{};  // successors with count 1, 2, 3+
    double lower_mass_seen = 0.0;       // backoff: lower-order mass of seen successors
  };

  void build();
  double prob_at(std::span<const TokenId> context, TokenId token) const;
  const Context* find(std::span<const TokenId> context) const;

  CountTable counts_;
  Smoothing method_;
  std::size_t vocab_size_;
  std::uint64_t vocab_hash_;
  // levels_[k] maps contexts of length k to the effective successor counts.
  std::vector<std::map<Ngram, Context>> levels_;
  std::vector<std::array<double, 3>> discounts_;
};

/// exp(-(1/N_W) sum log P) over every token (Full) or over the third
/// utterance's tokens only (U3), each conditioned on the dialogue prefix.
double ngram_perplexity(const NgramModel& model, const Dataset& data, Scope scope);

}  // namespace hred
