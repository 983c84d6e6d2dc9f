#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hred/ngram.hpp"
#include "hred/rng.hpp"
#include "ngram_oracle.hpp"

using namespace hred;
using hred::testing::NgramOracle;

namespace {

constexpr double kTol = 1e-9;
constexpr TokenId a = 0, b = 1, c = 2;
const Smoothing kAll[] = {Smoothing::Backoff, Smoothing::WittenBell, Smoothing::Absolute, Smoothing::ModifiedKn};

Dataset one_stream(std::vector<TokenId> s) { return Dataset{{Dialogue{{std::move(s)}}}, 0}; }

NgramModel toy(Smoothing m, std::size_t order = 2) {
  return NgramModel(CountTable::count(one_stream({a, b, a, c, a, b}), order), m, 3);
}

Dataset random_corpus(Rng& rng, std::size_t vocab, std::size_t dialogues, std::size_t max_len) {
  Dataset d;
  for (std::size_t i = 0; i < dialogues; ++i) {
    Dialogue dlg;
    const std::size_t utts = 1 + rng.uniform_int(3);
    for (std::size_t u = 0; u < utts; ++u) {
      Utterance utt;
      const std::size_t len = rng.uniform_int(max_len);
      // A skewed draw so some tokens repeat often and some never appear.
      for (std::size_t t = 0; t < len; ++t) utt.push_back(static_cast<TokenId>(rng.uniform_int(1 + rng.uniform_int(vocab - 1))));
      utt.push_back(static_cast<TokenId>(vocab - 1));
      dlg.utterances.push_back(utt);
    }
    d.dialogues.push_back(dlg);
  }
  return d;
}

double sum_over_vocab(const NgramModel& m, const std::vector<TokenId>& ctx) {
  double s = 0;
  for (TokenId v = 0; v < m.vocab_size(); ++v) s += m.prob(ctx, v);
  return s;
}

}  // namespace

TEST_CASE("counting") {
  const CountTable t = CountTable::count(one_stream({a, b, a, b}), 2);
  CHECK(t.count(std::vector<TokenId>{a, b}) == 2);
  CHECK(t.count(std::vector<TokenId>{b, a}) == 1);
  CHECK(t.count(std::vector<TokenId>{b, b}) == 0);
  CHECK(t.total_tokens() == 4);
  CHECK(CountTable::count(Dataset{}, 3).empty());
  CHECK_THROWS_AS(CountTable(0), std::invalid_argument);
  CHECK_THROWS_AS(CountTable(kMaxNgramOrder + 1), std::invalid_argument);

  SUBCASE("no n-gram spans two dialogues") {
    Dataset d{{Dialogue{{{a, b}}}, Dialogue{{{c, a}}}}, 0};
    const CountTable u = CountTable::count(d, 2);
    CHECK(u.count(std::vector<TokenId>{b, c}) == 0);
    CHECK(u.count(std::vector<TokenId>{c, a}) == 1);
  }
  SUBCASE("utterances are concatenated within a dialogue") {
    Dataset d{{Dialogue{{{a, b}, {c}}}}, 0};
    CHECK(CountTable::count(d, 2).count(std::vector<TokenId>{b, c}) == 1);
  }
  SUBCASE("orders are consistent and unigrams sum to the token count") {
    Rng rng(5);
    const Dataset d = random_corpus(rng, 6, 20, 6);
    const CountTable t3 = CountTable::count(d, 3);
    std::size_t tokens = 0;
    for (const auto& dl : d.dialogues) tokens += token_count(dl);
    CHECK(t3.total_tokens() == tokens);
    // A k-gram count is its extensions to the left plus its occurrences at stream starts.
    for (std::size_t k = 1; k < 3; ++k) {
      for (const auto& [g, n] : t3.ngrams(k)) {
        std::uint64_t ext = 0;
        for (const auto& [g2, n2] : t3.ngrams(k + 1))
          if (std::equal(g.begin(), g.end(), g2.begin() + 1)) ext += n2;
        std::uint64_t starts = 0;
        for (const auto& dl : d.dialogues) {
          const auto s = concat(dl);
          if (s.size() >= k && std::equal(g.begin(), g.end(), s.begin())) ++starts;
        }
        CHECK(n == ext + starts);
      }
    }
  }
}

TEST_CASE("backoff: maximum-likelihood sub-case") {
  const CountTable t = CountTable::count(one_stream({a, b, a, b}), 2);
  CHECK(t.mle(std::vector<TokenId>{a}, b) == 1.0);
  CHECK(t.mle(std::vector<TokenId>{a}, a) == 0.0);
  CHECK(t.mle({}, a) == 0.5);
  CHECK(t.mle(std::vector<TokenId>{c}, a) == 0.0);

  // All successors of a seen: backoff reduces to the MLE.
  const NgramModel full(CountTable::count(one_stream({a, b, a, a}), 2), Smoothing::Backoff, 2);
  CHECK(full.prob(std::vector<TokenId>{a}, b) == doctest::Approx(0.5).epsilon(1e-15));
  // Unseen successors present: seen tokens keep 0.6 of the MLE mass.
  const NgramModel m(t, Smoothing::Backoff, 2);
  CHECK(m.prob(std::vector<TokenId>{a}, b) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(m.prob(std::vector<TokenId>{a}, a) == doctest::Approx(0.4).epsilon(1e-15));

  SUBCASE("duplicating the corpus leaves probabilities unchanged") {
    Rng rng(11);
    Dataset d = random_corpus(rng, 7, 15, 5);
    Dataset twice = d;
    twice.dialogues.insert(twice.dialogues.end(), d.dialogues.begin(), d.dialogues.end());
    const NgramModel m1(CountTable::count(d, 3), Smoothing::Backoff, 7);
    const NgramModel m2(CountTable::count(twice, 3), Smoothing::Backoff, 7);
    for (const auto& [g, n] : m1.counts().ngrams(3)) {
      const std::vector<TokenId> ctx(g.begin(), g.end() - 1);
      for (TokenId v = 0; v < 7; ++v) CHECK(m1.prob(ctx, v) == doctest::Approx(m2.prob(ctx, v)).epsilon(1e-14));
    }
  }
}

TEST_CASE("witten-bell: hand arithmetic") {
  const NgramModel m = toy(Smoothing::WittenBell);
  // Unigram level: (c + 1) / 9.
  CHECK(std::abs(m.prob({}, a) - 4.0 / 9) < kTol);
  CHECK(std::abs(m.prob({}, b) - 3.0 / 9) < kTol);
  CHECK(std::abs(m.prob({}, c) - 2.0 / 9) < kTol);
  // Context a: N = 3, T = 2, backoff mass T / (N + T) = 2/5.
  const std::vector<TokenId> ha{a};
  CHECK(std::abs(m.prob(ha, b) - 8.0 / 15) < kTol);
  CHECK(std::abs(m.prob(ha, c) - 13.0 / 45) < kTol);
  CHECK(std::abs(m.prob(ha, a) - 8.0 / 45) < kTol);
  CHECK(std::abs(m.prob(ha, a) - 0.4 * m.prob({}, a)) < kTol);
  CHECK(std::abs(m.prob(std::vector<TokenId>{b}, a) - 13.0 / 18) < kTol);

  // Perplexity term by term: a|-, b|a, a|b, c|a, a|c, b|a.
  const double logp = std::log(4.0 / 9) + std::log(8.0 / 15) + std::log(13.0 / 18) + std::log(13.0 / 45) +
                      std::log(13.0 / 18) + std::log(8.0 / 15);
  const double ppl = ngram_perplexity(m, one_stream({a, b, a, c, a, b}), Scope::Full);
  CHECK(std::abs(ppl - std::exp(-logp / 6)) < kTol * ppl);
}

TEST_CASE("absolute discounting: hand arithmetic") {
  const NgramModel m = toy(Smoothing::Absolute);
  CHECK(std::abs(m.discounts(1)[0] - 1.0 / 3) < kTol);
  CHECK(std::abs(m.discounts(2)[0] - 3.0 / 5) < kTol);
  CHECK(std::abs(m.prob({}, a) - 1.0 / 2) < kTol);
  CHECK(std::abs(m.prob({}, b) - 1.0 / 3) < kTol);
  CHECK(std::abs(m.prob({}, c) - 1.0 / 6) < kTol);
  const std::vector<TokenId> ha{a};
  CHECK(std::abs(m.prob(ha, b) - 0.6) < kTol);
  CHECK(std::abs(m.prob(ha, c) - 0.2) < kTol);
  CHECK(std::abs(m.prob(ha, a) - 0.2) < kTol);
}

TEST_CASE("modified kneser-ney: hand arithmetic") {
  const NgramModel m = toy(Smoothing::ModifiedKn);
  // Bigram level (raw counts 2,1,1,1): Y = 3/5, D1 = 0.6, D2 = 2, D3+ = D2.
  const auto d2 = m.discounts(2);
  CHECK(std::abs(d2[0] - 0.6) < kTol);
  CHECK(std::abs(d2[1] - 2.0) < kTol);
  CHECK(std::abs(d2[2] - 2.0) < kTol);
  // Unigram continuation counts a=3 (b, c, start), b=1, c=1: no n2, fallback discounts.
  const auto d1 = m.discounts(1);
  CHECK(d1 == std::vector<double>{0.5, 1.0, 1.5});
  CHECK(std::abs(m.prob({}, a) - 7.0 / 15) < kTol);
  CHECK(std::abs(m.prob({}, b) - 4.0 / 15) < kTol);
  CHECK(std::abs(m.prob({}, c) - 4.0 / 15) < kTol);
  const std::vector<TokenId> ha{a};
  CHECK(std::abs(m.prob(ha, b) - 10.4 / 45) < kTol);
  CHECK(std::abs(m.prob(ha, c) - 16.4 / 45) < kTol);
  CHECK(std::abs(m.prob(ha, a) - 18.2 / 45) < kTol);
}

TEST_CASE("brute-force oracle on toy corpora") {
  const std::vector<std::vector<std::vector<TokenId>>> corpora{
      {{a, b, a, c, a, b}},
      {{a, b, c, a, b, c, c, a, b, a}},
      {{a, a, a, b}, {b, a, c, c, a}},
      {{c, b, a, b, c, a, a, b, b, c}},
  };
  for (const auto& streams : corpora) {
    Dataset d;
    for (const auto& s : streams) d.dialogues.push_back(Dialogue{{s}});
    for (std::size_t order = 1; order <= 4; ++order) {
      for (Smoothing method : kAll) {
        CAPTURE(order);
        CAPTURE(smoothing_name(method));
        const NgramModel m(CountTable::count(d, order), method, 4);
        const NgramOracle oracle(streams, order, method, 4);
        for (std::size_t k = 1; k <= order && method != Smoothing::Backoff && method != Smoothing::WittenBell; ++k) {
          const auto want = oracle.discounts(k);
          const auto got = m.discounts(k);
          for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < kTol);
        }
        // Every context up to length order-1 over a 4-token alphabet.
        std::vector<std::vector<TokenId>> contexts{{}};
        for (std::size_t len = 1; len < order; ++len) {
          std::vector<std::vector<TokenId>> next;
          for (const auto& h : contexts)
            if (h.size() == len - 1)
              for (TokenId u = 0; u < 4; ++u) {
                auto g = h;
                g.push_back(u);
                next.push_back(g);
              }
          contexts.insert(contexts.end(), next.begin(), next.end());
        }
        for (const auto& h : contexts)
          for (TokenId v = 0; v < 4; ++v) CHECK(std::abs(m.prob(h, v) - oracle.prob(h, v)) < kTol);
      }
    }
  }
}

TEST_CASE("normalization and positivity: 100 randomized corpora per method") {
  for (Smoothing method : kAll) {
    CAPTURE(smoothing_name(method));
    double worst = 0.0;
    double smallest = 1.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      Rng rng(1000 + trial);
      const std::size_t vocab = 3 + rng.uniform_int(8);
      const std::size_t order = 1 + rng.uniform_int(4);
      const Dataset d = random_corpus(rng, vocab, 1 + rng.uniform_int(6), 8);
      const NgramModel m(CountTable::count(d, order), method, vocab);
      std::vector<std::vector<TokenId>> contexts{{}};
      for (std::size_t k = 2; k <= order; ++k)
        for (const auto& [g, n] : m.counts().ngrams(k)) contexts.emplace_back(g.begin(), g.end() - 1);
      for (int r = 0; r < 5; ++r) {
        std::vector<TokenId> h(order - 1);
        for (auto& t : h) t = static_cast<TokenId>(rng.uniform_int(vocab));
        contexts.push_back(h);
      }
      for (const auto& h : contexts) {
        worst = std::max(worst, std::abs(sum_over_vocab(m, h) - 1.0));
        for (TokenId v = 0; v < vocab; ++v) smallest = std::min(smallest, m.prob(h, v));
      }
    }
    CHECK(worst < kTol);
    CHECK(smallest > 0.0);
  }
}

TEST_CASE("discount estimate stays in (0,1)") {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(trial);
    const Dataset d = random_corpus(rng, 9, 10, 10);
    for (Smoothing method : {Smoothing::Absolute, Smoothing::ModifiedKn}) {
      const NgramModel m(CountTable::count(d, 3), method, 9);
      for (std::size_t k = 1; k <= 3; ++k) {
        const double d1 = m.discounts(k)[0];
        CHECK(d1 > 0.0);
        CHECK(d1 < 1.0);
      }
    }
  }
}

TEST_CASE("perplexity limits and scopes") {
  SUBCASE("uniform unigram") {
    std::vector<TokenId> s;
    for (TokenId v = 0; v < 10; ++v) s.push_back(v);
    for (Smoothing method : {Smoothing::Backoff, Smoothing::WittenBell}) {
      const NgramModel m(CountTable::count(one_stream(s), 1), method, 10);
      CHECK(ngram_perplexity(m, one_stream(s), Scope::Full) == doctest::Approx(10.0).epsilon(1e-12));
    }
  }
  SUBCASE("memorized deterministic stream") {
    std::vector<TokenId> s;
    for (int i = 0; i < 3000; ++i) s.push_back(static_cast<TokenId>(i % 3));
    const NgramModel m(CountTable::count(one_stream(s), 4), Smoothing::WittenBell, 5);
    CHECK(ngram_perplexity(m, one_stream(s), Scope::Full) < 1.01);
  }
  SUBCASE("U3 scope conditions on the prefix") {
    const Dataset d{{Dialogue{{{a, b}, {c}, {a, b}}}}, 0};
    const NgramModel m(CountTable::count(d, 3), Smoothing::WittenBell, 3);
    const double logp = m.log_prob(std::vector<TokenId>{a, b, c}, a) + m.log_prob(std::vector<TokenId>{a, b, c, a}, b);
    CHECK(ngram_perplexity(m, d, Scope::U3) == doctest::Approx(std::exp(-logp / 2)).epsilon(1e-12));
    CHECK_THROWS_AS(ngram_perplexity(m, Dataset{{Dialogue{{{a}, {b}}}}, 0}, Scope::U3), std::invalid_argument);
  }
}

TEST_CASE("errors and serialization") {
  const NgramModel empty(CountTable(2), Smoothing::WittenBell, 3);
  CHECK_THROWS_AS(empty.prob({}, a), std::logic_error);
  const NgramModel m = toy(Smoothing::ModifiedKn, 3);
  CHECK_THROWS_AS(m.prob({}, 3), std::out_of_range);
  CHECK_THROWS_AS(NgramModel(CountTable::count(one_stream({a, b, 7}), 2), Smoothing::Backoff, 3), std::invalid_argument);
  CHECK_THROWS_AS(parse_smoothing("kneser"), std::invalid_argument);
  for (Smoothing s : kAll) CHECK(parse_smoothing(smoothing_name(s)) == s);

  std::stringstream file;
  m.write(file);
  CHECK(file.str().rfind("3\tmodified-kn\tversion=1 vocab_size=3", 0) == 0);
  const NgramModel back = NgramModel::read(file);
  CHECK(back.counts() == m.counts());
  CHECK(back.method() == m.method());
  for (TokenId x = 0; x < 3; ++x)
    for (TokenId y = 0; y < 3; ++y) CHECK(back.prob(std::vector<TokenId>{x, y}, a) == m.prob(std::vector<TokenId>{x, y}, a));
  std::stringstream bad("2\tbackoff\n");
  CHECK_THROWS(NgramModel::read(bad));
}
