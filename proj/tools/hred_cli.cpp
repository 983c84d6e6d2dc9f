// Command-line entry points: synth, preprocess, train, eval, ngram, sample, serve.

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hred/bootstrap.hpp"
#include "hred/checkpoint.hpp"
#include "hred/corpus.hpp"
#include "hred/decode.hpp"
#include "hred/detokenize.hpp"
#include "hred/http_service.hpp"
#include "hred/metrics.hpp"
#include "hred/ngram.hpp"
#include "hred/session.hpp"
#include "hred/synthetic.hpp"
#include "hred/trainer.hpp"

namespace fs = std::filesystem;
using namespace hred;
using nlohmann::ordered_json;

namespace {

/// Removes output paths created by this run unless commit() is called.
class OutputGuard {
 public:
  void track(const fs::path& p) {
    if (!p.empty() && !fs::exists(p)) created_.push_back(p);
  }
  void commit() { created_.clear(); }
  ~OutputGuard() {
    for (const auto& p : created_) {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  }

 private:
  std::vector<fs::path> created_;
};

Tokenizer make_tokenizer(const std::string& gazetteer) {
  return gazetteer.empty() ? Tokenizer() : Tokenizer::from_gazetteer_file(gazetteer);
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Splits tokenized text at </s>; a final utterance without </s> gets one.
std::vector<Utterance> parse_context(const std::string& text, const Tokenizer& tok, const Vocabulary& vocab) {
  std::vector<Utterance> context;
  std::vector<std::string> current;
  auto close = [&] {
    if (current.empty()) return;
    Utterance u = vocab.encode(current);
    u.push_back(special::kEndOfUtterance);
    context.push_back(std::move(u));
    current.clear();
  };
  for (auto& t : tok.tokenize(text)) {
    if (t == special::kEndOfUtteranceText) {
      close();
    } else {
      current.push_back(std::move(t));
    }
  }
  close();
  if (context.empty()) throw std::invalid_argument("context has no tokens");
  return context;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string out;
  SyntheticConfig config;
  std::size_t qa_pairs = 200;
};

void run_synth(const SynthOptions& o) {
  OutputGuard guard;
  guard.track(o.out);
  write_synthetic_corpus(o.out, o.config, o.qa_pairs);
  guard.commit();
  std::cout << "wrote synthetic corpus to " << o.out << "\n";
}

// ---------------------------------------------------------------- preprocess

struct PreprocessOptions {
  std::string movies;
  std::string qa;
  std::string gazetteer;
  std::string out;
  PreprocessConfig config;
};

void run_preprocess(const PreprocessOptions& o) {
  const Tokenizer tok = make_tokenizer(o.gazetteer);
  const auto movies = load_scripts(o.movies);
  std::vector<QaPair> qa;
  if (!o.qa.empty()) qa = load_qa(o.qa);
  const PreprocessResult r = preprocess(movies, qa, tok, o.config);
  OutputGuard guard;
  guard.track(o.out);
  write_preprocessed(r, o.out);
  guard.commit();
  std::cout << "vocabulary " << r.vocab.size() << " tokens (hash " << hex64(r.vocab.hash()) << ")\n"
            << "train " << r.train.dialogues.size() << " triples from " << r.train.movies.size() << " movies\n"
            << "valid " << r.valid.dialogues.size() << " triples from " << r.valid.movies.size() << " movies\n"
            << "test  " << r.test.dialogues.size() << " triples from " << r.test.movies.size() << " movies\n";
  if (!o.qa.empty()) std::cout << "qa    " << r.qa.size() << " dialogues, " << r.qa_skipped << " skipped\n";
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string train_path;
  std::string valid_path;
  std::string vocab_path;
  std::string out;
  std::string resume;
  std::string embeddings;
  std::string pretrain_qa;
  std::size_t pretrain_epochs = 4;
  std::string variant = "hred";
  std::string summary = "l2pool";
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t context_dim = 64;
  std::size_t maxout = 2;
  TrainConfig config;
  std::uint64_t seed = 1;
};

void run_train(TrainOptions o) {
  const Vocabulary vocab = Vocabulary::load(o.vocab_path);
  const Dataset train_set = load_dataset(o.train_path, vocab);
  const Dataset valid_set = o.valid_path.empty() ? Dataset{} : load_dataset(o.valid_path, vocab);
  if (!o.embeddings.empty() && !o.pretrain_qa.empty())
    throw std::invalid_argument("--embeddings and --pretrain-qa are separate bootstraps; pick one");

  o.config.seed = o.seed;
  o.config.out_dir = o.out;
  o.config.on_log = [](const LogRecord& r) {
    std::cout << "epoch " << r.epoch << " step " << r.step << " train_nll " << r.train_nll << " valid_ppl "
              << r.valid_ppl << std::endl;
  };

  OutputGuard guard;
  guard.track(o.out);
  fs::create_directories(o.out);

  std::optional<DialogueModel> model;
  std::optional<TrainProgress> progress;
  if (!o.resume.empty()) {
    auto [m, p] = load_progress(o.resume);
    model.emplace(std::move(m));
    progress = std::move(p);
  } else {
    ModelConfig mc;
    mc.variant = parse_variant(o.variant);
    mc.summary = parse_summary(o.summary);
    mc.vocab_size = vocab.size();
    mc.embed_dim = o.embed_dim;
    mc.hidden_dim = o.hidden_dim;
    mc.context_dim = o.context_dim;
    mc.maxout_pieces = o.maxout;
    mc.vocab_hash = vocab.hash();
    Rng rng = Rng(o.seed).fork(0x1417);
    model.emplace(DialogueModel::initialize(mc, rng));
  }

  TrainResult result = [&] {
    if (!o.embeddings.empty()) {
      const EmbeddingCoverage cov = load_pretrained_embeddings(*model, load_embeddings(o.embeddings), vocab);
      std::cout << "pretrained embeddings cover " << cov.covered.size() << " of " << cov.vocab_size << " tokens\n";
      StagedConfigs stages = bootstrap_stages(o.config, cov);
      stages.stage1.out_dir = o.out / fs::path("stage1");
      fs::create_directories(stages.stage1.out_dir);
      TrainResult s1 = train(std::move(*model), train_set, valid_set, stages.stage1);
      if (s1.reason == StopReason::Diverged) return s1;
      return train(std::move(s1.best), train_set, valid_set, stages.stage2);
    }
    if (!o.pretrain_qa.empty()) {
      const Dataset qa = load_dataset(o.pretrain_qa, vocab);
      PretrainConfig pc;
      pc.pretrain = o.config;
      pc.pretrain.max_epochs = o.pretrain_epochs;
      pc.pretrain.out_dir = o.out / fs::path("pretrain");
      fs::create_directories(pc.pretrain.out_dir);
      pc.finetune = o.config;
      PretrainResult pr = pretrain_finetune(std::move(*model), qa, train_set, valid_set, pc);
      return std::move(pr.finetune);
    }
    return train(std::move(*model), train_set, valid_set, o.config, progress);
  }();

  if (result.reason == StopReason::Diverged) throw std::runtime_error("training diverged: " + result.error);
  guard.commit();
  std::cout << "stopped: " << stop_reason_name(result.reason) << " after " << result.epochs << " epochs, "
            << result.steps << " steps; best valid ppl " << result.best_valid_ppl << "\n"
            << "best model: " << (fs::path(o.out) / "best.ckpt").string() << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string model;
  std::string data;
  std::string vocab;
  std::string scope = "both";
  std::string format = "json";
  std::size_t threads = 1;
};

void run_eval(const EvalOptions& o) {
  const DialogueModel model = load_model(o.model);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const Dataset data = load_dataset(o.data, vocab);
  check_vocabulary(model, data, o.data);
  const EvalReport r = evaluate(model, data, o.threads);
  if (o.format == "table") {
    std::cout << r.to_table(variant_name(model.config().variant));
    return;
  }
  const auto full = nlohmann::json::parse(r.to_json());
  ordered_json out;
  if (o.scope != "u3") {
    out["ppl"] = full["ppl"];
    out["wer"] = full["wer"];
  }
  if (o.scope != "full") {
    out["ppl_u3"] = full["ppl_u3"];
    out["wer_u3"] = full["wer_u3"];
  }
  out["n"] = full["n"];
  out["n_w"] = full["n_w"];
  out["n_w_u3"] = full["n_w_u3"];
  std::cout << out.dump(2) << "\n";
}

// ---------------------------------------------------------------- ngram

struct NgramOptions {
  std::string train_path;
  std::string load;
  std::string vocab;
  std::vector<std::string> eval;
  std::string save;
  std::string method = "modified-kn";
  std::size_t order = 3;
  std::string scope = "both";
};

void run_ngram(const NgramOptions& o) {
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  if (o.train_path.empty() == o.load.empty()) throw std::invalid_argument("give exactly one of --train and --load");
  std::optional<NgramModel> model;
  if (!o.load.empty()) {
    model.emplace(NgramModel::load(o.load));
    if (model->vocab_hash() != 0 && model->vocab_hash() != vocab.hash())
      throw std::invalid_argument("n-gram model was trained with a different vocabulary");
  } else {
    const Dataset train_set = load_dataset(o.train_path, vocab);
    model.emplace(CountTable::count(train_set, o.order), parse_smoothing(o.method), vocab.size(), vocab.hash());
  }
  OutputGuard guard;
  if (!o.save.empty()) {
    guard.track(o.save);
    model->save(o.save);
  }
  ordered_json out;
  out["order"] = model->order();
  out["method"] = smoothing_name(model->method());
  for (const auto& path : o.eval) {
    const Dataset data = load_dataset(path, vocab);
    ordered_json r;
    if (o.scope != "u3") r["ppl"] = ngram_perplexity(*model, data, Scope::Full);
    if (o.scope != "full") r["ppl_u3"] = ngram_perplexity(*model, data, Scope::U3);
    out["eval"][path] = r;
  }
  guard.commit();
  std::cout << out.dump(2) << "\n";
}

// ---------------------------------------------------------------- sample

struct SampleOptions {
  std::string model;
  std::string vocab;
  std::string gazetteer;
  std::string context;
  std::string mode = "map";
  std::size_t beam = 5;
  double temperature = 1.0;
  std::size_t max_length = kDefaultMaxDecodeLength;
  std::size_t count = 1;
  std::uint64_t seed = 1;
};

void run_sample(const SampleOptions& o) {
  const DialogueModel model = load_model(o.model);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  if (model.config().vocab_hash != 0 && model.config().vocab_hash != vocab.hash())
    throw std::invalid_argument("model was trained with a different vocabulary");
  const auto context = parse_context(o.context, make_tokenizer(o.gazetteer), vocab);
  const DialogueState state = absorb_context(model, context);

  auto print = [&](const Hypothesis& h) {
    std::printf("%.4f\t%s\n", h.log_prob, detokenize(vocab.decode(h.tokens)).c_str());
  };
  if (parse_decode_mode(o.mode) == DecodeMode::Map) {
    print(beam_search(model, state, BeamConfig{o.beam, o.max_length, 0.0}));
    return;
  }
  for (std::size_t i = 0; i < o.count; ++i) {
    Rng rng = Rng(o.seed).fork(i);
    print(sample(model, state, SampleConfig{o.temperature, o.max_length}, rng));
  }
}

// ---------------------------------------------------------------- serve

struct ServeOptions {
  std::string model;
  std::string vocab;
  std::string gazetteer;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t idle_minutes = 30;
  std::size_t threads = 8;
};

httplib::Server* g_server = nullptr;

void run_serve(const ServeOptions& o) {
  auto model = std::make_shared<const DialogueModel>(load_model(o.model));
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::load(o.vocab));
  auto sessions = std::make_shared<SessionManager>(model, vocab, make_tokenizer(o.gazetteer),
                                                   std::chrono::minutes(o.idle_minutes));
  auto api = std::make_shared<HttpApi>(sessions);
  httplib::Server server;
  const std::size_t threads = o.threads;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  install_routes(server, api);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "serving " << variant_name(model->config().variant) << " on http://" << o.host << ":" << o.port
            << std::endl;
  if (!server.listen(o.host, o.port)) throw std::runtime_error("cannot listen on " + o.host + ":" + std::to_string(o.port));
  g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical recurrent encoder-decoder dialogue toolkit"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Write the synthetic movie-script corpus");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--movies", synth.config.movies, "Number of movies")->check(CLI::PositiveNumber);
  c_synth->add_option("--scenes", synth.config.scenes_per_movie, "Scenes per movie")->check(CLI::PositiveNumber);
  c_synth->add_option("--qa-pairs", synth.qa_pairs, "Question-answer pairs");
  c_synth->add_option("--seed", synth.config.seed, "Random seed");

  PreprocessOptions pre;
  auto* c_pre = app.add_subcommand("preprocess", "Tokenize scripts, split by movie, build triples and vocabulary");
  c_pre->add_option("--movies", pre.movies, "Directory of <name>.txt scripts (SPEAKER<TAB>line)")
      ->required()
      ->check(CLI::ExistingDirectory);
  c_pre->add_option("--qa", pre.qa, "Question-answer pairs (question<TAB>answer)")->check(CLI::ExistingFile);
  c_pre->add_option("--gazetteer", pre.gazetteer, "Person names, one per line")->check(CLI::ExistingFile);
  c_pre->add_option("--out", pre.out, "Output directory")->required();
  c_pre->add_option("--vocab-cap", pre.config.vocab_cap, "Vocabulary size excluding reserved tokens")
      ->check(CLI::PositiveNumber);
  c_pre->add_option("--truncate", pre.config.truncation_limit, "Maximum tokens per triple")
      ->check(CLI::PositiveNumber);
  c_pre->add_option("--valid-fraction", pre.config.valid_fraction, "Fraction of movies for validation")
      ->check(CLI::Range(0.0, 1.0));
  c_pre->add_option("--test-fraction", pre.config.test_fraction, "Fraction of movies for test")
      ->check(CLI::Range(0.0, 1.0));
  c_pre->add_option("--seed", pre.config.seed, "Random seed for the movie split");

  TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "Train a dialogue model");
  c_train->add_option("--train", tr.train_path, "Training triples")->required()->check(CLI::ExistingFile);
  c_train->add_option("--valid", tr.valid_path, "Validation triples")->check(CLI::ExistingFile);
  c_train->add_option("--vocab", tr.vocab_path, "vocab.tsv")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "Output directory for checkpoints and train.log")->required();
  c_train->add_option("--resume", tr.resume, "last.ckpt to resume from")->check(CLI::ExistingFile);
  c_train->add_option("--embeddings", tr.embeddings, "Pretrained word vectors (two-stage bootstrap)")
      ->check(CLI::ExistingFile);
  c_train->add_option("--pretrain-qa", tr.pretrain_qa, "Q-A dialogues for pretraining before finetuning")
      ->check(CLI::ExistingFile);
  c_train->add_option("--pretrain-epochs", tr.pretrain_epochs, "Epochs of Q-A pretraining");
  c_train->add_option("--variant", tr.variant, "rnn-lm, hred or hred-bi")
      ->check(CLI::IsMember({"rnn-lm", "hred", "hred-bi"}));
  c_train->add_option("--summary", tr.summary, "hred-bi utterance summary")->check(CLI::IsMember({"concat", "l2pool"}));
  c_train->add_option("--embed-dim", tr.embed_dim, "Word embedding size")->check(CLI::PositiveNumber);
  c_train->add_option("--hidden-dim", tr.hidden_dim, "Encoder and decoder state size")->check(CLI::PositiveNumber);
  c_train->add_option("--context-dim", tr.context_dim, "Context state size")->check(CLI::PositiveNumber);
  c_train->add_option("--maxout", tr.maxout, "Maxout pieces (0 disables)");
  c_train->add_option("--epochs", tr.config.max_epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  c_train->add_option("--patience", tr.config.patience, "Validations without improvement before stopping");
  c_train->add_option("--batch", tr.config.batch_size, "Dialogues per step")->check(CLI::PositiveNumber);
  c_train->add_option("--lr", tr.config.adam.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  c_train->add_option("--clip", tr.config.adam.clip_norm, "Global gradient norm clip (0 disables)");
  c_train->add_option("--target-ppl", tr.config.target_train_ppl, "Stop when training perplexity drops below this");
  c_train->add_option("--threads", tr.config.eval_threads, "Threads for validation")->check(CLI::PositiveNumber);
  c_train->add_option("--seed", tr.seed, "Random seed for initialization and shuffling");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "Perplexity and word error rate of a model");
  c_eval->add_option("--model", ev.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--data", ev.data, "Triples to evaluate")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--vocab", ev.vocab, "vocab.tsv")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--scope", ev.scope, "full, u3 or both")->check(CLI::IsMember({"full", "u3", "both"}));
  c_eval->add_option("--format", ev.format, "json or table")->check(CLI::IsMember({"json", "table"}));
  c_eval->add_option("--threads", ev.threads, "Scoring threads")->check(CLI::PositiveNumber);

  NgramOptions ng;
  auto* c_ngram = app.add_subcommand("ngram", "Train or load an n-gram baseline and report perplexity");
  c_ngram->add_option("--train", ng.train_path, "Training triples")->check(CLI::ExistingFile);
  c_ngram->add_option("--load", ng.load, "Saved n-gram model")->check(CLI::ExistingFile);
  c_ngram->add_option("--vocab", ng.vocab, "vocab.tsv")->required()->check(CLI::ExistingFile);
  c_ngram->add_option("--eval", ng.eval, "Triples to evaluate (repeatable)")->check(CLI::ExistingFile);
  c_ngram->add_option("--save", ng.save, "Write the trained model here");
  c_ngram->add_option("--method", ng.method, "backoff, witten-bell, absolute or modified-kn")
      ->check(CLI::IsMember({"backoff", "witten-bell", "absolute", "modified-kn"}));
  c_ngram->add_option("--order", ng.order, "n-gram order")->check(CLI::Range(std::size_t{1}, kMaxNgramOrder));
  c_ngram->add_option("--scope", ng.scope, "full, u3 or both")->check(CLI::IsMember({"full", "u3", "both"}));

  SampleOptions sa;
  auto* c_sample = app.add_subcommand("sample", "Decode a response to a context");
  c_sample->add_option("--model", sa.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--vocab", sa.vocab, "vocab.tsv")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--gazetteer", sa.gazetteer, "Person names")->check(CLI::ExistingFile);
  c_sample->add_option("--context", sa.context, "Context utterances separated by </s>")->required();
  c_sample->add_option("--mode", sa.mode, "map or sample")->check(CLI::IsMember({"map", "sample"}));
  c_sample->add_option("--beam", sa.beam, "Beam width")->check(CLI::PositiveNumber);
  c_sample->add_option("--temperature", sa.temperature, "Sampling temperature")->check(CLI::PositiveNumber);
  c_sample->add_option("--max-length", sa.max_length, "Maximum response tokens")->check(CLI::PositiveNumber);
  c_sample->add_option("--count", sa.count, "Number of samples")->check(CLI::PositiveNumber);
  c_sample->add_option("--seed", sa.seed, "Random seed for sampling");

  ServeOptions sv;
  auto* c_serve = app.add_subcommand("serve", "Start the HTTP chat service");
  c_serve->add_option("--model", sv.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_serve->add_option("--vocab", sv.vocab, "vocab.tsv")->required()->check(CLI::ExistingFile);
  c_serve->add_option("--gazetteer", sv.gazetteer, "Person names")->check(CLI::ExistingFile);
  c_serve->add_option("--host", sv.host, "Bind address");
  c_serve->add_option("--port", sv.port, "Port")->check(CLI::Range(1, 65535));
  c_serve->add_option("--idle-minutes", sv.idle_minutes, "Evict sessions idle this long")
      ->check(CLI::PositiveNumber);
  c_serve->add_option("--threads", sv.threads, "Request worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_synth) run_synth(synth);
    if (*c_pre) run_preprocess(pre);
    if (*c_train) run_train(tr);
    if (*c_eval) run_eval(ev);
    if (*c_ngram) run_ngram(ng);
    if (*c_sample) run_sample(sa);
    if (*c_serve) run_serve(sv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
