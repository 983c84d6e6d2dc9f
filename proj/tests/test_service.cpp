#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <thread>

#include "fixtures.hpp"
#include "hred/checkpoint.hpp"
#include "hred/decode.hpp"
#include "hred/detokenize.hpp"
#include "hred/http_service.hpp"
#include "hred/session.hpp"

using namespace hred;
using nlohmann::json;

namespace {

const std::vector<std::vector<std::string>> kSentences{
    {"hello", "there", ".", "</s>"},
    {"where", "are", "you", "going", "?", "</s>"},
    {"i", "don", "'", "t", "know", ",", "<person>", ".", "</s>"},
    {"we", "need", "<number>", "dollars", "!", "</s>"},
    {"okay", "then", ".", "</s>"}};

std::shared_ptr<const Vocabulary> test_vocab() {
  return std::make_shared<const Vocabulary>(Vocabulary::build(kSentences));
}

std::shared_ptr<const DialogueModel> test_model(const Vocabulary& vocab, Variant v = Variant::Hred,
                                                std::uint64_t seed = 11) {
  auto cfg = testing::small_config(v, vocab.size(), 8, 4);
  cfg.vocab_hash = vocab.hash();
  Rng rng(seed);
  auto m = DialogueModel::initialize(cfg, rng);
  // Larger output weights make decoding outcomes depend visibly on context.
  for (auto& [name, t] : m.params())
    if (name.rfind("out.", 0) == 0)
      for (double& x : t.values()) x *= 4.0;
  return std::make_shared<const DialogueModel>(std::move(m));
}

struct Fixture {
  std::shared_ptr<const Vocabulary> vocab = test_vocab();
  std::shared_ptr<const DialogueModel> model = test_model(*vocab);
  std::shared_ptr<SessionManager> sessions =
      std::make_shared<SessionManager>(model, vocab, Tokenizer({"John"}));
};

DecodeSettings sample_settings(std::uint64_t seed) {
  DecodeSettings s;
  s.mode = DecodeMode::Sample;
  s.seed = seed;
  s.max_length = 12;
  return s;
}

const std::vector<std::string> kUserTurns{"Hello there, John.", "Where are you going?", "I don't know!"};

}  // namespace

TEST_CASE("two sessions with the same settings and input give identical responses") {
  for (DecodeMode mode : {DecodeMode::Map, DecodeMode::Sample}) {
    Fixture f;
    DecodeSettings s = sample_settings(5);
    s.mode = mode;
    const auto a = f.sessions->create(s);
    const auto b = f.sessions->create(s);
    CHECK(a != b);
    // Interleave turns; session b also gets an unrelated turn in a third session in between.
    const auto c = f.sessions->create(sample_settings(99));
    for (const auto& text : kUserTurns) {
      const auto ra = f.sessions->chat_turn(a, text);
      f.sessions->chat_turn(c, "okay then .");
      const auto rb = f.sessions->chat_turn(b, text);
      CHECK(ra.token_ids == rb.token_ids);
      CHECK(ra.log_prob == rb.log_prob);
      CHECK(ra.text == rb.text);
      CHECK(ra.turn == rb.turn);
    }
    CHECK(f.sessions->state(a).context == f.sessions->state(b).context);
    CHECK(f.sessions->history(a) == f.sessions->history(b));
  }
}

TEST_CASE("session state equals replaying its history from the initial state") {
  for (Variant v : {Variant::RnnLm, Variant::Hred, Variant::HredBi}) {
    Fixture f;
    f.model = test_model(*f.vocab, v);
    f.sessions = std::make_shared<SessionManager>(f.model, f.vocab, Tokenizer({"John"}));
    const auto id = f.sessions->create(sample_settings(3));
    for (const auto& text : kUserTurns) f.sessions->chat_turn(id, text);
    const auto history = f.sessions->history(id);
    REQUIRE(history.size() == 2 * kUserTurns.size());

    DialogueState replay = f.model->initial_state();
    for (const auto& u : history) replay = f.model->absorb(replay, u);
    const DialogueState live = f.sessions->state(id);
    CHECK(live.turns == replay.turns);
    CHECK(live.context == replay.context);
    CHECK(live.lm.state == replay.lm.state);
    CHECK(live.lm.input == replay.lm.input);

    // A fresh session fed the same user turns reproduces the same state.
    const auto again = f.sessions->create(sample_settings(3));
    for (const auto& text : kUserTurns) f.sessions->chat_turn(again, text);
    CHECK(f.sessions->state(again).context == live.context);
    CHECK(f.sessions->state(again).lm.state == live.lm.state);
  }
}

TEST_CASE("returned log-probability matches re-scoring the history with forward") {
  for (DecodeMode mode : {DecodeMode::Map, DecodeMode::Sample}) {
    Fixture f;
    DecodeSettings s = sample_settings(17);
    s.mode = mode;
    const auto id = f.sessions->create(s);
    for (const auto& text : kUserTurns) {
      const auto r = f.sessions->chat_turn(id, text);
      Dialogue d;
      d.utterances = f.sessions->history(id);
      const std::size_t last = d.utterances.size() - 1;
      const ForwardResult fr = f.model->forward(d);
      double lp = 0.0;
      for (const auto& p : fr.positions)
        if (p.utterance == last && p.index < r.token_ids.size()) lp += p.log_prob;
      CHECK(r.log_prob == doctest::Approx(lp).epsilon(1e-12));
      CHECK(r.text == detokenize(f.vocab->decode(r.token_ids)));
      CHECK(r.turn == d.utterances.size());
    }
  }
}

TEST_CASE("session decoding matches in-process decoding after a checkpoint round trip") {
  Fixture f;
  const auto dir = std::filesystem::temp_directory_path() / "hred_test_service";
  std::filesystem::create_directories(dir);
  save_model(dir / "m.ckpt", *f.model);
  auto loaded = std::make_shared<const DialogueModel>(load_model(dir / "m.ckpt"));
  SessionManager served(loaded, f.vocab, Tokenizer({"John"}));

  for (DecodeMode mode : {DecodeMode::Map, DecodeMode::Sample}) {
    DecodeSettings s = sample_settings(23);
    s.mode = mode;
    const auto id = served.create(s);
    DialogueState state = f.model->initial_state();
    Tokenizer tok({"John"});
    std::size_t turn = 0;
    for (const auto& text : kUserTurns) {
      Utterance user = f.vocab->encode(tok.tokenize(text));
      user.push_back(special::kEndOfUtterance);
      state = f.model->absorb(state, user);
      turn += 1;
      Hypothesis h;
      if (mode == DecodeMode::Map) {
        h = beam_search(*f.model, state, BeamConfig{s.width, s.max_length, 0.0});
      } else {
        Rng rng = Rng(s.seed).fork(turn);
        h = sample(*f.model, state, SampleConfig{s.temperature, s.max_length}, rng);
      }
      Utterance reply = h.tokens;
      if (!h.finished) reply.push_back(special::kEndOfUtterance);
      state = f.model->absorb(state, reply);
      turn += 1;

      const auto r = served.chat_turn(id, text);
      CHECK(r.token_ids == h.tokens);
      CHECK(r.log_prob == h.log_prob);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("chat_turn errors") {
  Fixture f;
  CHECK_THROWS_AS(f.sessions->chat_turn("nope", "hello"), SessionNotFound);
  const auto id = f.sessions->create();
  CHECK_THROWS_AS(f.sessions->chat_turn(id, ""), std::invalid_argument);
  CHECK_THROWS_AS(f.sessions->chat_turn(id, "   "), std::invalid_argument);
  CHECK_THROWS_AS(f.sessions->chat_turn(id, "</s>"), std::invalid_argument);
  CHECK(f.sessions->history(id).empty());
  DecodeSettings bad;
  bad.width = 0;
  CHECK_THROWS_AS(f.sessions->create(bad), std::invalid_argument);
  CHECK_THROWS_AS(f.sessions->chat_turn(id, "hello", bad), std::invalid_argument);
  bad = {};
  bad.temperature = 0.0;
  CHECK_THROWS_AS(f.sessions->chat_turn(id, "hello", bad), std::invalid_argument);
  // Unknown words map to <unk> rather than failing.
  CHECK_NOTHROW(f.sessions->chat_turn(id, "zebra xylophone"));
  CHECK(f.sessions->history(id).front() ==
        Utterance{special::kUnk, special::kUnk, special::kEndOfUtterance});
  CHECK(f.sessions->remove(id));
  CHECK_FALSE(f.sessions->remove(id));
  CHECK_THROWS_AS(f.sessions->history(id), SessionNotFound);
}

TEST_CASE("session manager rejects a vocabulary that does not match the model") {
  auto vocab = test_vocab();
  auto other = std::make_shared<const Vocabulary>(Vocabulary::build(std::vector<std::vector<std::string>>{{"x", "y"}}));
  auto model = test_model(*vocab);
  CHECK_THROWS_AS(SessionManager(model, other, Tokenizer()), std::invalid_argument);
}

TEST_CASE("idle sessions are evicted") {
  Fixture f;
  SessionManager sm(f.model, f.vocab, Tokenizer(), std::chrono::seconds(60));
  const auto a = sm.create();
  const auto b = sm.create();
  CHECK(sm.evict_idle() == 0);
  sm.chat_turn(b, "hello");
  CHECK(sm.evict_idle(SessionManager::Clock::now() + std::chrono::seconds(61)) == 2);
  CHECK(sm.size() == 0);
  CHECK_THROWS_AS(sm.chat_turn(a, "hello"), SessionNotFound);
}

TEST_CASE("concurrent sessions do not observe each other") {
  Fixture f;
  const std::size_t n = 8;
  std::vector<std::string> ids;
  std::vector<std::vector<ChatResponse>> expected(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Reference transcripts computed sequentially.
    const auto ref = f.sessions->create(sample_settings(i));
    for (const auto& text : kUserTurns) expected[i].push_back(f.sessions->chat_turn(ref, text));
    ids.push_back(f.sessions->create(sample_settings(i)));
  }
  std::vector<std::vector<ChatResponse>> got(n);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n; ++i)
    threads.emplace_back([&, i] {
      for (const auto& text : kUserTurns) got[i].push_back(f.sessions->chat_turn(ids[i], text));
    });
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(got[i].size() == expected[i].size());
    for (std::size_t k = 0; k < got[i].size(); ++k) {
      CHECK(got[i][k].token_ids == expected[i][k].token_ids);
      CHECK(got[i][k].log_prob == expected[i][k].log_prob);
    }
  }
}

TEST_CASE("settings JSON parsing") {
  const DecodeSettings s = settings_from_json(json{{"mode", "sample"}, {"temperature", 0.5}, {"seed", 9}});
  CHECK(s.mode == DecodeMode::Sample);
  CHECK(s.temperature == 0.5);
  CHECK(s.seed == 9);
  CHECK(s.width == 5);
  CHECK(settings_from_json(settings_to_json(s)).seed == 9);
  CHECK_THROWS_AS(settings_from_json(json{{"width", 0}}), std::invalid_argument);
  CHECK_THROWS_AS(settings_from_json(json{{"width", -1}}), std::invalid_argument);
  CHECK_THROWS_AS(settings_from_json(json{{"mode", "greedy"}}), std::invalid_argument);
  CHECK_THROWS_AS(settings_from_json(json{{"beam", 3}}), std::invalid_argument);
  CHECK_THROWS_AS(settings_from_json(json{{"temperature", -1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(settings_from_json(json::array()), std::invalid_argument);
}

TEST_CASE("HTTP API handles the five endpoints") {
  Fixture f;
  HttpApi api(f.sessions);

  auto health = api.handle("GET", "/healthz", "");
  CHECK(health.status == 200);
  CHECK(health.body["status"] == "ok");

  auto model = api.handle("GET", "/model", "");
  CHECK(model.status == 200);
  CHECK(model.body["variant"] == "hred");
  CHECK(model.body["vocab_size"] == f.vocab->size());
  CHECK(model.body["hidden_dim"] == 8);
  CHECK(model.body["embed_dim"] == 4);
  CHECK(model.body["vocab_hash"].get<std::string>().size() == 16);

  auto created = api.handle("POST", "/sessions", R"({"settings": {"mode": "sample", "seed": 4}})");
  REQUIRE(created.status == 201);
  const std::string id = created.body["session_id"];
  CHECK(created.body["settings"]["mode"] == "sample");
  CHECK(created.body["settings"]["seed"] == 4);

  auto turn = api.handle("POST", "/sessions/" + id + "/turns", R"({"utterance": "Hello there."})");
  REQUIRE(turn.status == 200);
  CHECK(turn.body["session_id"] == id);
  CHECK(turn.body["turn"] == 2);
  const auto ids = turn.body["token_ids"].get<std::vector<TokenId>>();
  CHECK(turn.body["response"] == detokenize(f.vocab->decode(ids)));
  CHECK(turn.body["log_prob"].get<double>() <= 0.0);

  // Per-turn settings override becomes the session's settings.
  auto turn2 = api.handle("POST", "/sessions/" + id + "/turns",
                          R"({"utterance": "okay .", "settings": {"mode": "map", "width": 3}})");
  CHECK(turn2.status == 200);
  CHECK(turn2.body["turn"] == 4);
  CHECK(f.sessions->settings(id).mode == DecodeMode::Map);
  CHECK(f.sessions->settings(id).width == 3);
  CHECK(f.sessions->settings(id).seed == 4);

  CHECK(api.handle("GET", "/healthz", "").body["sessions"] == 1);
  CHECK(api.handle("DELETE", "/sessions/" + id, "").status == 204);
  CHECK(api.handle("DELETE", "/sessions/" + id, "").status == 404);
  CHECK(api.handle("GET", "/healthz", "").body["sessions"] == 0);
}

TEST_CASE("HTTP API error statuses") {
  Fixture f;
  HttpApi api(f.sessions);
  CHECK(api.handle("POST", "/sessions/missing/turns", R"({"utterance": "hi"})").status == 404);
  CHECK(api.handle("GET", "/nowhere", "").status == 404);
  CHECK(api.handle("GET", "/sessions", "").status == 405);
  CHECK(api.handle("POST", "/sessions", "{not json").status == 400);
  CHECK(api.handle("POST", "/sessions", R"({"settings": {"width": 0}})").status == 400);
  CHECK(api.handle("POST", "/sessions", R"({"bogus": 1})").status == 400);
  const std::string id = api.handle("POST", "/sessions", "").body["session_id"];
  const std::string turns = "/sessions/" + id + "/turns";
  CHECK(api.handle("POST", turns, "{}").status == 400);
  CHECK(api.handle("POST", turns, R"({"utterance": ""})").status == 400);
  CHECK(api.handle("POST", turns, R"({"utterance": 5})").status == 400);
  CHECK(api.handle("POST", turns, R"({"utterance": "hi", "settings": {"temperature": 0}})").status == 400);
  CHECK(api.handle("POST", turns, R"({"utterance": "hi", "session_id": "other"})").status == 400);
  const auto err = api.handle("POST", turns, "[1,2]");
  CHECK(err.status == 400);
  CHECK(err.body.contains("error"));
}

TEST_CASE("HTTP server round trip over loopback") {
  Fixture f;
  auto api = std::make_shared<HttpApi>(f.sessions);
  httplib::Server server;
  install_routes(server, api);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");

  auto model = client.Get("/model");
  REQUIRE(model);
  CHECK(json::parse(model->body)["variant"] == "hred");

  auto created = client.Post("/sessions", R"({"settings": {"mode": "sample", "seed": 8}})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["session_id"];

  auto turn = client.Post("/sessions/" + id + "/turns", R"({"utterance": "Where are you going?"})",
                          "application/json");
  REQUIRE(turn);
  CHECK(turn->status == 200);
  const json body = json::parse(turn->body);

  // Same request in-process on a fresh session gives the same tokens.
  DecodeSettings s = sample_settings(8);
  s.max_length = kDefaultMaxDecodeLength;
  const auto fresh = f.sessions->create(s);
  const auto r = f.sessions->chat_turn(fresh, "Where are you going?");
  CHECK(body["token_ids"].get<std::vector<TokenId>>() == r.token_ids);
  CHECK(body["log_prob"].get<double>() == r.log_prob);

  auto missing = client.Post("/sessions/none/turns", R"({"utterance": "hi"})", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto del = client.Delete("/sessions/" + id);
  REQUIRE(del);
  CHECK(del->status == 204);
  auto del2 = client.Delete("/sessions/" + id);
  REQUIRE(del2);
  CHECK(del2->status == 404);

  server.stop();
  runner.join();
}
