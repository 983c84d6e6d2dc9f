#pragma once

// Brute-force smoothing formulas that read counts straight off the token
// streams by linear scanning. Independent of CountTable and NgramModel.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "hred/ngram.hpp"

namespace hred::testing {

class NgramOracle {
 public:
  NgramOracle(std::vector<std::vector<TokenId>> streams, std::size_t order, Smoothing method, std::size_t vocab)
      : streams_(std::move(streams)), order_(order), method_(method), vocab_(vocab) {}

  double prob(std::vector<TokenId> context, TokenId v) const {
    if (context.size() > order_ - 1) context.erase(context.begin(), context.end() - static_cast<long>(order_ - 1));
    return p(context, v);
  }

  // Occurrences of g as a whole n-gram.
  std::uint64_t occurrences(const std::vector<TokenId>& g) const {
    std::uint64_t n = 0;
    for (const auto& s : streams_)
      for (std::size_t i = 0; i + g.size() <= s.size(); ++i)
        if (std::equal(g.begin(), g.end(), s.begin() + static_cast<long>(i))) ++n;
    return n;
  }

  // Distinct left neighbours of g, with the stream start counted as one.
  std::uint64_t continuation(const std::vector<TokenId>& g) const {
    std::set<long> left;
    for (const auto& s : streams_)
      for (std::size_t i = 0; i + g.size() <= s.size(); ++i)
        if (std::equal(g.begin(), g.end(), s.begin() + static_cast<long>(i)))
          left.insert(i == 0 ? -1 : static_cast<long>(s[i - 1]));
    return left.size();
  }

  std::uint64_t effective(const std::vector<TokenId>& g) const {
    if (method_ == Smoothing::ModifiedKn && g.size() < order_) return continuation(g);
    return occurrences(g);
  }

  // Count-of-counts over all distinct n-grams of length k, effective counts.
  std::array<double, 4> count_of_counts(std::size_t k) const {
    std::set<std::vector<TokenId>> grams;
    for (const auto& s : streams_)
      for (std::size_t i = 0; i + k <= s.size(); ++i)
        grams.insert(std::vector<TokenId>(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + k)));
    std::array<double, 4> coc{};
    for (const auto& g : grams) {
      const auto c = effective(g);
      if (c >= 1 && c <= 4) coc[c - 1] += 1;
    }
    return coc;
  }

  std::array<double, 3> discounts(std::size_t k) const {
    const auto n = count_of_counts(k);
    if (n[0] == 0 || n[1] == 0) {
      if (method_ == Smoothing::Absolute) return {0.5, 0.5, 0.5};
      return {0.5, 1.0, 1.5};
    }
    const double y = n[0] / (n[0] + 2 * n[1]);
    if (method_ == Smoothing::Absolute) return {y, y, y};
    std::array<double, 3> d{1 - 2 * y * n[1] / n[0], 2 - 3 * y * n[2] / n[1], 0.0};
    d[2] = n[2] > 0 ? 3 - 4 * y * n[3] / n[2] : d[1];
    for (int i = 1; i < 3; ++i)
      if (!(d[i] > 0)) d[i] = d[i - 1];
    return d;
  }

 private:
  double p(const std::vector<TokenId>& h, TokenId v) const {
    const double lower = h.empty() ? 1.0 / static_cast<double>(vocab_) : p({h.begin() + 1, h.end()}, v);
    double total = 0, distinct = 0, c = 0;
    std::array<double, 3> nk{};
    for (TokenId u = 0; u < vocab_; ++u) {
      auto g = h;
      g.push_back(u);
      const double cu = static_cast<double>(effective(g));
      if (cu > 0) {
        total += cu;
        distinct += 1;
        nk[std::min(cu, 3.0) - 1] += 1;
      }
      if (u == v) c = cu;
    }
    if (total == 0) return lower;
    switch (method_) {
      case Smoothing::WittenBell:
        return (c + distinct * lower) / (total + distinct);
      case Smoothing::Absolute: {
        const double d = discounts(h.size() + 1)[0];
        return std::max(c - d, 0.0) / total + d * distinct / total * lower;
      }
      case Smoothing::ModifiedKn: {
        const auto d = discounts(h.size() + 1);
        const double dc = c == 0 ? 0 : d[std::min(c, 3.0) - 1];
        return std::max(c - dc, 0.0) / total + (d[0] * nk[0] + d[1] * nk[1] + d[2] * nk[2]) / total * lower;
      }
      case Smoothing::Backoff: {
        if (distinct >= static_cast<double>(vocab_)) return c / total;
        if (c > 0) return 0.6 * c / total;
        double seen_lower = 0;
        for (TokenId u = 0; u < vocab_; ++u) {
          auto g = h;
          g.push_back(u);
          if (occurrences(g) > 0) seen_lower += h.empty() ? 1.0 / static_cast<double>(vocab_) : p({h.begin() + 1, h.end()}, u);
        }
        return 0.4 * lower / (1 - seen_lower);
      }
    }
    return 0;
  }

  std::vector<std::vector<TokenId>> streams_;
  std::size_t order_;
  Smoothing method_;
  std::size_t vocab_;
};

}  // namespace hred::testing
