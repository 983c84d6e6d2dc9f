#include "hred/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hred/rng.hpp"

namespace hred {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

template <class Tok>
std::vector<std::vector<Tok>> truncate_impl(std::vector<std::vector<Tok>> d, std::size_t limit,
                                            const Tok& eos, const Tok& cont) {
  if (limit < d.size()) {
    throw std::invalid_argument("truncation limit " + std::to_string(limit) + " leaves no room for " +
                                std::to_string(d.size()) + " end-of-utterance tokens");
  }
  std::size_t total = 0;
  for (const auto& u : d) total += u.size();
  for (std::size_t k = d.size(); k-- > 0 && total > limit;) {
    auto& u = d[k];
    if (u.empty() || u.back() != eos) continue;
    while (total > limit && u.size() > 1) {
      u.erase(u.end() - 2);
      --total;
    }
    while (u.size() > 1 && u[u.size() - 2] == cont) {
      u.erase(u.end() - 2);
      --total;
    }
  }
  return d;
}

}  // namespace

Movie read_script(std::istream& in, std::string name) {
  Movie movie{std::move(name), {}};
  ScriptDialogue current;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      if (!current.empty()) movie.dialogues.push_back(std::move(current));
      current.clear();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(movie.name + ":" + std::to_string(lineno) + ": expected SPEAKER<TAB>text");
    }
    current.push_back(Turn{trim(line.substr(0, tab)), line.substr(tab + 1)});
  }
  if (!current.empty()) movie.dialogues.push_back(std::move(current));
  return movie;
}

Movie load_script(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_script(in, path.stem().string());
}

std::vector<Movie> load_scripts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Movie> movies;
  for (const auto& f : files) movies.push_back(load_script(f));
  return movies;
}

std::vector<QaPair> read_qa(std::istream& in) {
  std::vector<QaPair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      pairs.push_back({line, ""});
    } else {
      pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
  }
  return pairs;
}

std::vector<QaPair> load_qa(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_qa(in);
}

std::vector<TextDialogue> make_triples(const ScriptDialogue& dialogue, const Tokenizer& tokenizer) {
  std::vector<std::string> speakers;
  std::vector<TextUtterance> turns;
  for (const auto& turn : dialogue) {
    auto tokens = tokenizer.tokenize(turn.text);
    if (tokens.empty()) continue;
    const std::string speaker = to_lower_ascii(trim(turn.speaker));
    if (!speakers.empty() && speakers.back() == speaker) {
      turns.back().push_back(special::kContinuedText);
      turns.back().insert(turns.back().end(), tokens.begin(), tokens.end());
    } else {
      speakers.push_back(speaker);
      turns.push_back(std::move(tokens));
    }
  }
  for (auto& t : turns) t.push_back(special::kEndOfUtteranceText);

  std::vector<TextDialogue> triples;
  for (std::size_t i = 0; i + 2 < turns.size(); ++i) {
    if (speakers[i] != speakers[i + 2] || speakers[i] == speakers[i + 1]) continue;
    triples.push_back({turns[i], turns[i + 1], turns[i + 2]});
  }
  return triples;
}

QaConversion qa_to_dialogues(std::span<const QaPair> pairs, const Tokenizer& tokenizer) {
  QaConversion out;
  for (const auto& p : pairs) {
    auto q = tokenizer.tokenize(p.question);
    auto a = tokenizer.tokenize(p.answer);
    if (q.empty() || a.empty()) {
      ++out.skipped;
      continue;
    }
    q.push_back(special::kEndOfUtteranceText);
    a.push_back(special::kEndOfUtteranceText);
    out.dialogues.push_back({std::move(q), std::move(a)});
  }
  return out;
}

TextDialogue truncate(const TextDialogue& dialogue, std::size_t limit) {
  return truncate_impl<std::string>(dialogue, limit, special::kEndOfUtteranceText, special::kContinuedText);
}

Dialogue truncate(const Dialogue& dialogue, std::size_t limit) {
  return Dialogue{truncate_impl<TokenId>(dialogue.utterances, limit, special::kEndOfUtterance,
                                         special::kContinued)};
}

SplitStats stats(const Dataset& split, std::optional<std::size_t> movies) {
  if (split.dialogues.empty()) throw std::invalid_argument("stats of an empty split");
  std::size_t tokens = 0, unk = 0;
  for (const auto& d : split.dialogues) {
    for (const auto& u : d.utterances) {
      tokens += u.size();
      unk += static_cast<std::size_t>(std::count(u.begin(), u.end(), special::kUnk));
    }
  }
  const double n = static_cast<double>(split.dialogues.size());
  return SplitStats{split.dialogues.size(), static_cast<double>(tokens) / n, static_cast<double>(unk) / n, movies};
}

Dataset encode_dialogues(std::span<const TextDialogue> dialogues, const Vocabulary& vocab) {
  Dataset out;
  out.vocab_hash = vocab.hash();
  out.dialogues.reserve(dialogues.size());
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    Dialogue d;
    for (const auto& u : dialogues[i]) {
      const auto where = [&] { return "dialogue " + std::to_string(i + 1) + ": "; };
      if (u.empty() || u.back() != special::kEndOfUtteranceText) {
        throw std::invalid_argument(where() + "utterance does not end in </s>");
      }
      if (std::count(u.begin(), u.end(), special::kEndOfUtteranceText) != 1) {
        throw std::invalid_argument(where() + "interior </s>");
      }
      if (u.size() > 1 && u[u.size() - 2] == special::kContinuedText) {
        throw std::invalid_argument(where() + "utterance ends in <c>");
      }
      d.utterances.push_back(vocab.encode(u));
    }
    if (d.utterances.empty()) throw std::invalid_argument("dialogue " + std::to_string(i + 1) + " is empty");
    out.dialogues.push_back(std::move(d));
  }
  return out;
}

TextDialogue decode_dialogue(const Dialogue& dialogue, const Vocabulary& vocab) {
  TextDialogue out;
  for (const auto& u : dialogue.utterances) out.push_back(vocab.decode(u));
  return out;
}

void write_dialogues(std::ostream& out, std::span<const TextDialogue> dialogues) {
  for (const auto& d : dialogues) {
    for (std::size_t u = 0; u < d.size(); ++u) {
      if (u) out << '\t';
      for (std::size_t t = 0; t < d[u].size(); ++t) {
        if (t) out << ' ';
        out << d[u][t];
      }
    }
    out << '\n';
  }
}

std::vector<TextDialogue> read_dialogues(std::istream& in) {
  std::vector<TextDialogue> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    TextDialogue d;
    std::stringstream utterances(line);
    std::string utt;
    while (std::getline(utterances, utt, '\t')) {
      std::stringstream tokens(utt);
      TextUtterance u;
      std::string tok;
      while (tokens >> tok) u.push_back(tok);
      d.push_back(std::move(u));
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<TextDialogue> load_dialogues(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_dialogues(in);
}

Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab) {
  const auto text = load_dialogues(path);
  try {
    return encode_dialogues(text, vocab);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

PreprocessResult preprocess(std::span<const Movie> movies, std::span<const QaPair> qa,
                            const Tokenizer& tokenizer, const PreprocessConfig& config) {
  if (config.valid_fraction < 0 || config.test_fraction < 0 ||
      config.valid_fraction + config.test_fraction >= 1.0) {
    throw std::invalid_argument("split fractions must be non-negative and sum to less than 1");
  }
  std::vector<std::size_t> order(movies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return movies[a].name < movies[b].name || (movies[a].name == movies[b].name && a < b);
  });
  Rng rng(config.seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);

  const std::size_t m = order.size();
  auto share = [&](double f) {
    auto n = static_cast<std::size_t>(std::llround(f * static_cast<double>(m)));
    if (f > 0 && n == 0 && m >= 3) n = 1;
    return n;
  };
  const std::size_t n_valid = share(config.valid_fraction);
  const std::size_t n_test = share(config.test_fraction);
  if (n_valid + n_test >= m) {
    throw std::invalid_argument("need more movies than " + std::to_string(m) + " to fill every split");
  }

  PreprocessResult result{Vocabulary::from_tokens({}), {}, {}, {}, {}, 0};
  for (std::size_t k = 0; k < m; ++k) {
    const Movie& movie = movies[order[k]];
    SplitData& split = k < n_valid ? result.valid : (k < n_valid + n_test ? result.test : result.train);
    split.movies.push_back(movie.name);
    for (const auto& scene : movie.dialogues) {
      for (auto& t : make_triples(scene, tokenizer)) {
        split.dialogues.push_back(truncate(t, config.truncation_limit));
      }
    }
  }
  auto conv = qa_to_dialogues(qa, tokenizer);
  for (auto& d : conv.dialogues) result.qa.push_back(truncate(d, config.truncation_limit));
  result.qa_skipped = conv.skipped;

  std::vector<std::vector<std::string>> streams;
  for (const auto* set : {&result.train.dialogues, &result.qa}) {
    for (const auto& d : *set) {
      for (const auto& u : d) streams.push_back(u);
    }
  }
  result.vocab = Vocabulary::build(streams, config.vocab_cap);
  return result;
}

void write_preprocessed(const PreprocessResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Vocabulary& vocab = result.vocab;
  nlohmann::ordered_json summary;
  summary["vocab_size"] = vocab.size();
  summary["vocab_hash"] = vocab.hash();

  auto emit = [&](const std::vector<TextDialogue>& dialogues, const std::string& file) {
    const Dataset encoded = encode_dialogues(dialogues, vocab);
    std::vector<TextDialogue> mapped;
    mapped.reserve(encoded.dialogues.size());
    for (const auto& d : encoded.dialogues) mapped.push_back(decode_dialogue(d, vocab));
    auto out = open_output(dir / file);
    write_dialogues(out, mapped);
    if (!out) throw std::runtime_error("failed writing " + (dir / file).string());
    return encoded;
  };

  const std::pair<const char*, const SplitData*> splits[] = {
      {"train", &result.train}, {"valid", &result.valid}, {"test", &result.test}};
  for (const auto& [name, split] : splits) {
    const Dataset encoded = emit(split->dialogues, std::string(name) + ".triples");
    nlohmann::ordered_json s;
    s["movies"] = split->movies.size();
    s["triples"] = encoded.dialogues.size();
    if (!encoded.dialogues.empty()) {
      const SplitStats st = stats(encoded);
      s["avg_tokens"] = st.avg_tokens;
      s["avg_unk"] = st.avg_unk;
    }
    summary[name] = s;
  }
  if (!result.qa.empty()) {
    const Dataset encoded = emit(result.qa, "qa.dialogues");
    summary["qa"] = {{"dialogues", encoded.dialogues.size()}, {"skipped", result.qa_skipped}};
  }
  vocab.save(dir / "vocab.tsv");
  auto out = open_output(dir / "stats.json");
  out << summary.dump(2) << '\n';
}

}  // namespace hred
