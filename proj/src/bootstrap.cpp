#include "hred/bootstrap.hpp"

#include <stdexcept>

#include "hred/metrics.hpp"

namespace hred {

EmbeddingCoverage load_pretrained_embeddings(DialogueModel& model, const EmbeddingTable& table,
                                             const Vocabulary& vocab) {
  const ModelConfig& c = model.config();
  if (table.dim != c.embed_dim) {
    throw std::invalid_argument("embedding file has dimension " + std::to_string(table.dim) + " but d_e is " +
                                std::to_string(c.embed_dim));
  }
  if (vocab.size() != c.vocab_size) {
    throw std::invalid_argument("vocabulary has " + std::to_string(vocab.size()) + " tokens but the model expects " +
                                std::to_string(c.vocab_size));
  }
  Tensor& e = model.params().at("embed.E");
  EmbeddingCoverage coverage{{}, vocab.size()};
  for (TokenId id = special::kCount; id < vocab.size(); ++id) {
    auto it = table.vectors.find(vocab.token(id));
    if (it == table.vectors.end()) continue;
    for (std::size_t j = 0; j < c.embed_dim; ++j) e[id * c.embed_dim + j] = it->second[j];
    coverage.covered.push_back(id);
  }
  return coverage;
}

StagedConfigs bootstrap_stages(const TrainConfig& base, const EmbeddingCoverage& coverage) {
  StagedConfigs s{base, base};
  auto& rows = s.stage1.freeze.rows["embed.E"];
  for (TokenId id : coverage.covered) rows.insert(id);
  s.stage2.freeze.rows.erase("embed.E");
  s.stage2.freeze.params.erase("embed.E");
  return s;
}

PretrainResult pretrain_finetune(DialogueModel model, const Dataset& qa, const Dataset& target_train,
                                 const Dataset& target_valid, const PretrainConfig& config) {
  if (qa.vocab_hash && target_train.vocab_hash && qa.vocab_hash != target_train.vocab_hash) {
    throw std::invalid_argument("Q-A corpus and target corpus use different vocabularies");
  }
  check_vocabulary(model, qa, "Q-A corpus");
  check_vocabulary(model, target_train, "target training set");
  TrainResult a = train(std::move(model), qa, Dataset{}, config.pretrain);
  TrainConfig finetune = config.finetune;
  finetune.freeze.params.insert("embed.E");
  TrainResult b = train(a.last, target_train, target_valid, finetune);
  return PretrainResult{std::move(a), std::move(b)};
}

}  // namespace hred
