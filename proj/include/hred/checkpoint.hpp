#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "hred/model.hpp"
#include "hred/params.hpp"

namespace hred {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contents of a checkpoint file.
///
/// Layout (all integers little-endian, strings as u32 length + bytes):
///   "HREDCKPT"  u32 version
///   str variant  str bi-summary
///   u64 vocab_size  u64 d_e  u64 d_h  u64 d_ctx  u64 maxout_pieces
///   u64 vocabulary hash
///   u32 n_meta, then n_meta x (str key, str value)
///   u32 n_tensors, then per tensor:
///     u8 group (0 model parameter, 1 training state)  str name
///     u32 rank  rank x u64 dims  prod(dims) x f64 (IEEE-754 bit pattern)
struct CheckpointData {
  ModelConfig config;
  ParamStore params;
  ParamStore state;
  std::map<std::string, std::string> metadata;
};

void write_checkpoint(std::ostream& out, const CheckpointData& data);
CheckpointData read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const DialogueModel& model);
DialogueModel load_model(const std::filesystem::path& path);

}  // namespace hred
