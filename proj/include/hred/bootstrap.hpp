#pragma once

#include <vector>

#include "hred/embedding_io.hpp"
#include "hred/trainer.hpp"
#include "hred/vocab.hpp"

namespace hred {

struct EmbeddingCoverage {
  std::vector<TokenId> covered;
  std::size_t vocab_size = 0;
  double fraction() const {
    return vocab_size ? static_cast<double>(covered.size()) / static_cast<double>(vocab_size) : 0.0;
  }
};

/// Copies the file vector of every vocabulary token found in `table` into
/// its row of embed.E. Reserved tokens are never loaded and keep their
/// Gaussian initialization. Throws std::invalid_argument when the table
/// dimension differs from d_e or the vocabulary size differs from the model.
EmbeddingCoverage load_pretrained_embeddings(DialogueModel& model, const EmbeddingTable& table,
                                             const Vocabulary& vocab);

struct StagedConfigs {
  TrainConfig stage1;  // covered rows of embed.E frozen
  TrainConfig stage2;  // everything trainable
};

StagedConfigs bootstrap_stages(const TrainConfig& base, const EmbeddingCoverage& coverage);

struct PretrainConfig {
  /// Phase A: all parameters on two-turn dialogues.
  TrainConfig pretrain;
  /// Phase B: target dialogues with embed.E frozen.
  TrainConfig finetune;

  PretrainConfig() { pretrain.max_epochs = 4; }
};

struct PretrainResult {
  TrainResult pretrain;
  TrainResult finetune;
};

/// Throws std::invalid_argument when the corpora or the model carry
/// different non-zero vocabulary hashes.
PretrainResult pretrain_finetune(DialogueModel model, const Dataset& qa, const Dataset& target_train,
                                 const Dataset& target_valid, const PretrainConfig& config);

}  // namespace hred
