#include "hred/synthetic.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "hred/rng.hpp"

namespace hred {

namespace {

struct Topic {
  const char* name;
  std::vector<const char*> questions;
  std::vector<const char*> answers;
  std::vector<const char*> reactions;
};

const std::vector<const char*> kNames{"John", "Mary", "Peter", "Sarah", "Jack", "Kate", "Sam", "Anna"};
const std::vector<const char*> kPlaces{"the station", "the office", "the beach", "the city", "home", "the hotel"};
const std::vector<const char*> kFoods{"pizza", "soup", "fish", "bread", "cake", "rice"};
const std::vector<const char*> kThings{"the car", "the money", "the letter", "the gun", "the key", "the phone"};
const std::vector<const char*> kFeelings{"tired", "happy", "scared", "fine", "angry", "sorry"};

const std::vector<Topic>& topics() {
  static const std::vector<Topic> t{
      {"travel",
       {"where are you going , {name} ?", "when does the train leave ?", "how far is {place} ?"},
       {"i'm going to {place} .", "it leaves at {num} .", "about {num} miles from here ."},
       {"take me with you .", "we'd better hurry then .", "that's too far ."}},
      {"food",
       {"are you hungry ?", "what do you want for dinner ?", "did you cook this , {name} ?"},
       {"i could eat some {food} .", "let's have {food} tonight .", "yes , i made {food} ."},
       {"i'll get us some {food} .", "sounds good to me .", "it smells great ."}},
      {"money",
       {"how much do you need ?", "where's {thing} ?", "can you pay me back ?"},
       {"i need {num} dollars .", "i left {thing} at {place} .", "i'll pay you {num} tomorrow ."},
       {"that's a lot of money .", "go and get it !", "you'd better ."}},
      {"feelings",
       {"how are you , {name} ?", "what's wrong ?", "why are you so {feeling} ?"},
       {"i'm {feeling} .", "nothing . i'm just {feeling} .", "because {name} left me ."},
       {"i know how you feel .", "don't worry about it .", "get some rest ."}},
      {"work",
       {"what time do you start ?", "did {name} call the office ?", "are you working late ?"},
       {"i start at {num} .", "no , {name} didn't call .", "yes , until {num} ."},
       {"don't be late .", "call {name} again .", "i'll wait for you ."}},
      {"danger",
       {"who's there ?", "did you hear that ?", "where did you put {thing} ?"},
       {"it's me , {name} .", "it came from {place} .", "it's under the bed ."},
       {"you scared me !", "stay here . i'll check .", "don't touch it ."}},
  };
  return t;
}

const char* pick(const std::vector<const char*>& options, Rng& rng) {
  return options[rng.uniform_int(options.size())];
}

std::string fill(const std::string& pattern, Rng& rng) {
  std::string out;
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern[i] != '{') {
      out.push_back(pattern[i++]);
      continue;
    }
    const auto close = pattern.find('}', i);
    const std::string slot = pattern.substr(i + 1, close - i - 1);
    if (slot == "name") {
      out += pick(kNames, rng);
    } else if (slot == "num") {
      out += std::to_string(1 + rng.uniform_int(12));
    } else if (slot == "place") {
      out += pick(kPlaces, rng);
    } else if (slot == "food") {
      out += pick(kFoods, rng);
    } else if (slot == "thing") {
      out += pick(kThings, rng);
    } else if (slot == "feeling") {
      out += pick(kFeelings, rng);
    } else {
      throw std::logic_error("unknown template slot " + slot);
    }
    i = close + 1;
  }
  return out;
}

std::vector<std::size_t> topic_pool(const SyntheticConfig& c) {
  std::vector<std::size_t> pool = c.topics;
  if (pool.empty()) {
    for (std::size_t i = 0; i < topics().size(); ++i) pool.push_back(i);
  }
  for (auto t : pool) {
    if (t >= topics().size()) throw std::invalid_argument("unknown synthetic topic " + std::to_string(t));
  }
  return pool;
}

}  // namespace

std::vector<std::string> synthetic_topics() {
  std::vector<std::string> out;
  for (const auto& t : topics()) out.emplace_back(t.name);
  return out;
}

std::vector<std::string> synthetic_names() { return {kNames.begin(), kNames.end()}; }

std::vector<Movie> generate_movies(const SyntheticConfig& config) {
  if (config.min_turns == 0 || config.min_turns > config.max_turns) {
    throw std::invalid_argument("synthetic turns: need 0 < min_turns <= max_turns");
  }
  const auto pool = topic_pool(config);
  Rng root(config.seed);
  std::vector<Movie> movies;
  for (std::size_t m = 0; m < config.movies; ++m) {
    Rng rng = root.fork(m);
    char name[32];
    std::snprintf(name, sizeof name, "movie%03zu", m + 1);
    Movie movie{name, {}};
    for (std::size_t s = 0; s < config.scenes_per_movie; ++s) {
      const Topic& topic = topics()[pool[rng.uniform_int(pool.size())]];
      const std::string a = to_lower_ascii(pick(kNames, rng));
      std::string b = a;
      while (b == a) b = to_lower_ascii(pick(kNames, rng));
      const std::string speakers[2] = {a, b};
      const std::size_t turns = config.min_turns + rng.uniform_int(config.max_turns - config.min_turns + 1);
      ScriptDialogue scene;
      for (std::size_t k = 0; k < turns; ++k) {
        // Question, answer, reaction, repeating; the asker alternates each round.
        const std::size_t phase = k % 3;
        const std::size_t round = k / 3;
        const std::string& speaker = speakers[(round + (phase == 1 ? 1 : 0)) % 2];
        const auto& bank = phase == 0 ? topic.questions : (phase == 1 ? topic.answers : topic.reactions);
        scene.push_back({speaker, fill(pick(bank, rng), rng)});
        if (rng.uniform_int(100) < config.continuation_percent) {
          scene.push_back({speaker, fill(pick(topic.reactions, rng), rng)});
        }
      }
      movie.dialogues.push_back(std::move(scene));
    }
    movies.push_back(std::move(movie));
  }
  return movies;
}

std::vector<QaPair> generate_qa(std::size_t count, const SyntheticConfig& config) {
  const auto pool = topic_pool(config);
  Rng rng = Rng(config.seed).fork(0x51a);
  std::vector<QaPair> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Topic& topic = topics()[pool[rng.uniform_int(pool.size())]];
    const std::size_t k = rng.uniform_int(topic.questions.size());
    out.push_back({fill(topic.questions[k], rng), fill(topic.answers[k], rng)});
  }
  return out;
}

void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticConfig& config,
                            std::size_t qa_pairs) {
  std::filesystem::create_directories(dir / "movies");
  for (const auto& movie : generate_movies(config)) {
    std::ofstream out(dir / "movies" / (movie.name + ".txt"), std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "movies" / movie.name).string());
    for (std::size_t s = 0; s < movie.dialogues.size(); ++s) {
      if (s) out << '\n';
      for (const auto& turn : movie.dialogues[s]) {
        std::string tag = turn.speaker;
        for (char& c : tag) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        out << tag << '\t' << turn.text << '\n';
      }
    }
  }
  std::ofstream qa(dir / "qa.tsv", std::ios::binary | std::ios::trunc);
  for (const auto& p : generate_qa(qa_pairs, config)) qa << p.question << '\t' << p.answer << '\n';
  std::ofstream gaz(dir / "gazetteer.txt", std::ios::binary | std::ios::trunc);
  for (const auto& n : kNames) gaz << n << '\n';
  if (!qa || !gaz) throw std::runtime_error("failed writing synthetic corpus under " + dir.string());
}

}  // namespace hred
