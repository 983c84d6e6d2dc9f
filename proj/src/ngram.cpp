#include "hred/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hred {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kFallbackDiscount = 0.5;

}  // namespace

std::string smoothing_name(Smoothing s) {
  switch (s) {
    case Smoothing::Backoff: return "backoff";
    case Smoothing::WittenBell: return "witten-bell";
    case Smoothing::Absolute: return "absolute";
    case Smoothing::ModifiedKn: return "modified-kn";
  }
  throw std::invalid_argument("bad smoothing method");
}

Smoothing parse_smoothing(const std::string& name) {
  for (auto s : {Smoothing::Backoff, Smoothing::WittenBell, Smoothing::Absolute, Smoothing::ModifiedKn}) {
    if (smoothing_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown smoothing method '" + name +
                              "' (expected backoff, witten-bell, absolute or modified-kn)");
}

CountTable::CountTable(std::size_t order) {
  if (order < 1 || order > kMaxNgramOrder) {
    throw std::invalid_argument("n-gram order must be in 1.." + std::to_string(kMaxNgramOrder));
  }
  counts_.resize(order);
}

CountTable CountTable::count(const Dataset& corpus, std::size_t order) {
  CountTable t(order);
  for (const auto& d : corpus.dialogues) t.add_stream(concat(d));
  return t;
}

void CountTable::add_stream(std::span<const TokenId> stream) {
  for (std::size_t i = 0; i < stream.size(); ++i) {
    for (std::size_t k = 1; k <= order() && k <= i + 1; ++k) {
      ++counts_[k - 1][Ngram(stream.begin() + static_cast<std::ptrdiff_t>(i + 1 - k),
                             stream.begin() + static_cast<std::ptrdiff_t>(i + 1))];
    }
  }
}

void CountTable::add(const Ngram& ngram, std::uint64_t n) {
  if (ngram.empty() || ngram.size() > order()) {
    throw std::invalid_argument("n-gram length " + std::to_string(ngram.size()) + " outside 1.." +
                                std::to_string(order()));
  }
  if (n) counts_[ngram.size() - 1][ngram] += n;
}

std::uint64_t CountTable::count(std::span<const TokenId> ngram) const {
  if (ngram.empty() || ngram.size() > order()) return 0;
  const auto& level = counts_[ngram.size() - 1];
  auto it = level.find(Ngram(ngram.begin(), ngram.end()));
  return it == level.end() ? 0 : it->second;
}

const std::map<Ngram, std::uint64_t>& CountTable::ngrams(std::size_t k) const {
  if (k < 1 || k > order()) throw std::out_of_range("n-gram length outside table");
  return counts_[k - 1];
}

double CountTable::mle(std::span<const TokenId> context, TokenId token) const {
  if (context.size() >= order()) throw std::invalid_argument("context must be shorter than the order");
  const auto& level = counts_[context.size()];
  Ngram key(context.begin(), context.end());
  std::uint64_t total = 0, hit = 0;
  key.push_back(0);
  for (auto it = level.lower_bound(key); it != level.end(); ++it) {
    if (!std::equal(context.begin(), context.end(), it->first.begin())) break;
    total += it->second;
    if (it->first.back() == token) hit = it->second;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

std::uint64_t CountTable::total_tokens() const {
  std::uint64_t n = 0;
  for (const auto& [g, c] : counts_.front()) n += c;
  return n;
}

NgramModel::NgramModel(CountTable counts, Smoothing method, std::size_t vocab_size, std::uint64_t vocab_hash)
    : counts_(std::move(counts)), method_(method), vocab_size_(vocab_size), vocab_hash_(vocab_hash) {
  if (vocab_size_ == 0) throw std::invalid_argument("n-gram vocabulary size must be positive");
  for (const auto& [g, c] : counts_.ngrams(1)) {
    if (g[0] >= vocab_size_) {
      throw std::invalid_argument("counted token " + std::to_string(g[0]) + " outside vocabulary of size " +
                                  std::to_string(vocab_size_));
    }
  }
  build();
}

void NgramModel::build() {
  const std::size_t n = order();
  levels_.assign(n, {});
  discounts_.assign(n, {0.0, 0.0, 0.0});

  for (std::size_t k = 1; k <= n; ++k) {
    const auto& raw = counts_.ngrams(k);
    auto& level = levels_[k - 1];
    const bool continuation = method_ == Smoothing::ModifiedKn && k < n;
    if (!continuation) {
      for (const auto& [g, c] : raw) level[Ngram(g.begin(), g.end() - 1)].next[g.back()] = c;
    } else {
      // Distinct left neighbours of each k-gram; a stream start counts as one
      // more neighbour when the k-gram occurs there.
      std::map<Ngram, std::uint64_t> left, extended;
      for (const auto& [g, c] : counts_.ngrams(k + 1)) {
        const Ngram tail(g.begin() + 1, g.end());
        ++left[tail];
        extended[tail] += c;
      }
      for (const auto& [g, c] : raw) {
        std::uint64_t a = left.count(g) ? left[g] : 0;
        if (c > (extended.count(g) ? extended[g] : 0)) ++a;
        level[Ngram(g.begin(), g.end() - 1)].next[g.back()] = a;
      }
    }

    std::array<std::uint64_t, 4> coc{};
    for (auto& [h, ctx] : level) {
      for (const auto& [v, c] : ctx.next) {
        ctx.total += c;
        ++ctx.n[std::min<std::uint64_t>(c, 3) - 1];
        if (c <= 4) ++coc[c - 1];
      }
    }

    const double n1 = static_cast<double>(coc[0]), n2 = static_cast<double>(coc[1]);
    const double n3 = static_cast<double>(coc[2]), n4 = static_cast<double>(coc[3]);
    const bool estimable = coc[0] > 0 && coc[1] > 0;
    const double y = estimable ? n1 / (n1 + 2 * n2) : kFallbackDiscount;
    if (method_ == Smoothing::Absolute) {
      discounts_[k - 1] = {y, y, y};
    } else if (method_ == Smoothing::ModifiedKn) {
      std::array<double, 3> d{kFallbackDiscount, 2 * kFallbackDiscount, 3 * kFallbackDiscount};
      if (estimable) {
        d[0] = 1 - 2 * y * n2 / n1;
        d[1] = 2 - 3 * y * n3 / n2;
        d[2] = coc[2] > 0 ? 3 - 4 * y * n4 / n3 : d[1];
        for (std::size_t i = 1; i < 3; ++i)
          if (!(d[i] > 0)) d[i] = d[i - 1];
      }
      discounts_[k - 1] = d;
    }

    if (method_ == Smoothing::Backoff) {
      for (auto& [h, ctx] : level) {
        const std::span<const TokenId> shorter(h.data() + (h.empty() ? 0 : 1), h.empty() ? 0 : h.size() - 1);
        double s = 0.0;
        for (const auto& [v, c] : ctx.next) s += h.empty() ? 1.0 / static_cast<double>(vocab_size_) : prob_at(shorter, v);
        ctx.lower_mass_seen = s;
      }
    }
  }
}

const NgramModel::Context* NgramModel::find(std::span<const TokenId> context) const {
  const auto& level = levels_[context.size()];
  auto it = level.find(Ngram(context.begin(), context.end()));
  return it == level.end() || it->second.total == 0 ? nullptr : &it->second;
}

double NgramModel::prob_at(std::span<const TokenId> context, TokenId token) const {
  const double lower = context.empty() ? 1.0 / static_cast<double>(vocab_size_) : prob_at(context.subspan(1), token);
  const Context* ctx = find(context);
  if (!ctx) return lower;
  auto it = ctx->next.find(token);
  const double c = it == ctx->next.end() ? 0.0 : static_cast<double>(it->second);
  const double total = static_cast<double>(ctx->total);
  const double distinct = static_cast<double>(ctx->next.size());

  switch (method_) {
    case Smoothing::Backoff: {
      if (ctx->next.size() >= vocab_size_) return c / total;
      if (c > 0) return (1.0 - kBackoffFactor) * c / total;
      return kBackoffFactor * lower / (1.0 - ctx->lower_mass_seen);
    }
    case Smoothing::WittenBell:
      return (c + distinct * lower) / (total + distinct);
    case Smoothing::Absolute: {
      const double d = discounts_[context.size()][0];
      return std::max(c - d, 0.0) / total + d * distinct / total * lower;
    }
    case Smoothing::ModifiedKn: {
      const auto& d = discounts_[context.size()];
      const double dc = c == 0 ? 0.0 : d[std::min<std::size_t>(static_cast<std::size_t>(c), 3) - 1];
      const double gamma = (d[0] * static_cast<double>(ctx->n[0]) + d[1] * static_cast<double>(ctx->n[1]) +
                            d[2] * static_cast<double>(ctx->n[2])) /
                           total;
      return std::max(c - dc, 0.0) / total + gamma * lower;
    }
  }
  throw std::logic_error("bad smoothing method");
}

double NgramModel::prob(std::span<const TokenId> context, TokenId token) const {
  if (counts_.empty()) throw std::logic_error("n-gram model has no counts (untrained)");
  if (token >= vocab_size_) {
    throw std::out_of_range("token " + std::to_string(token) + " outside vocabulary of size " +
                            std::to_string(vocab_size_));
  }
  const std::size_t keep = std::min(context.size(), order() - 1);
  return prob_at(context.subspan(context.size() - keep), token);
}

double NgramModel::log_prob(std::span<const TokenId> context, TokenId token) const {
  return std::log(prob(context, token));
}

std::vector<double> NgramModel::discounts(std::size_t k) const {
  if (k < 1 || k > order()) throw std::out_of_range("n-gram length outside model");
  const auto& d = discounts_[k - 1];
  if (method_ == Smoothing::Absolute) return {d[0]};
  if (method_ == Smoothing::ModifiedKn) return {d[0], d[1], d[2]};
  return {};
}

void NgramModel::write(std::ostream& out) const {
  out << order() << '\t' << smoothing_name(method_) << '\t' << "version=" << kFormatVersion
      << " vocab_size=" << vocab_size_ << " vocab_hash=" << vocab_hash_ << '\n';
  for (std::size_t k = 1; k <= order(); ++k) {
    for (const auto& [g, c] : counts_.ngrams(k)) {
      for (std::size_t i = 0; i < g.size(); ++i) out << (i ? " " : "") << g[i];
      out << '\t' << c << '\n';
    }
  }
}

NgramModel NgramModel::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty n-gram model file");
  std::istringstream header(line);
  std::string order_s, method_s, params;
  if (!std::getline(header, order_s, '\t') || !std::getline(header, method_s, '\t') ||
      !std::getline(header, params)) {
    throw std::runtime_error("bad n-gram header: expected order<TAB>method<TAB>params");
  }
  std::map<std::string, std::string> kv;
  std::istringstream ps(params);
  for (std::string item; ps >> item;) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bad n-gram parameter '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  try {
    if (std::stoi(kv.at("version")) != kFormatVersion) throw std::runtime_error("unsupported n-gram format version");
    CountTable counts(std::stoul(order_s));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("n-gram line " + std::to_string(lineno) + ": missing count");
      Ngram g;
      std::istringstream ids(line.substr(0, tab));
      for (unsigned long id; ids >> id;) g.push_back(static_cast<TokenId>(id));
      counts.add(g, std::stoull(line.substr(tab + 1)));
    }
    return NgramModel(std::move(counts), parse_smoothing(method_s), std::stoul(kv.at("vocab_size")),
                      std::stoull(kv.at("vocab_hash")));
  } catch (const std::out_of_range&) {
    throw std::runtime_error("n-gram header is missing version, vocab_size or vocab_hash");
  }
}

void NgramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open n-gram model " + path.string());
  return read(in);
}

double ngram_perplexity(const NgramModel& model, const Dataset& data, Scope scope) {
  double log_sum = 0.0;
  std::size_t n_w = 0;
  for (const auto& d : data.dialogues) {
    std::vector<TokenId> prefix;
    for (std::size_t u = 0; u < d.utterances.size(); ++u) {
      for (TokenId tok : d.utterances[u]) {
        if (scope == Scope::Full || u == kU3Index) {
          log_sum += model.log_prob(prefix, tok);
          ++n_w;
        }
        prefix.push_back(tok);
      }
    }
  }
  if (n_w == 0) throw std::invalid_argument("perplexity over zero tokens");
  return std::exp(-log_sum / static_cast<double>(n_w));
}

}  // namespace hred
