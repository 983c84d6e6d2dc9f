#include "hred/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace hred {

namespace {

constexpr std::array<char, 8> kMagic{'H', 'R', 'E', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxRecord = std::uint64_t{1} << 40;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <class U>
  void uint(U v) {
    unsigned char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, sizeof(U));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CheckpointError("checkpoint truncated");
  }
  template <class U>
  U uint() {
    unsigned char b[sizeof(U)];
    bytes(b, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    if (n > (1u << 20)) throw CheckpointError("checkpoint string too long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
};

void write_tensor(Writer& w, std::uint8_t group, const std::string& name, const Tensor& t) {
  w.uint(group);
  w.str(name);
  w.uint(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.uint(static_cast<std::uint64_t>(d));
  for (double v : t.values()) w.f64(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const CheckpointData& data) {
  Writer w(out);
  w.bytes(kMagic.data(), kMagic.size());
  w.uint(kCheckpointVersion);
  const ModelConfig& c = data.config;
  w.str(variant_name(c.variant));
  w.str(summary_name(c.summary));
  for (std::size_t v : {c.vocab_size, c.embed_dim, c.hidden_dim, c.context_dim, c.maxout_pieces}) {
    w.uint(static_cast<std::uint64_t>(v));
  }
  w.uint(c.vocab_hash);
  w.uint(static_cast<std::uint32_t>(data.metadata.size()));
  for (const auto& [k, v] : data.metadata) {
    w.str(k);
    w.str(v);
  }
  w.uint(static_cast<std::uint32_t>(data.params.size() + data.state.size()));
  for (const auto& [name, t] : data.params) write_tensor(w, 0, name, t);
  for (const auto& [name, t] : data.state) write_tensor(w, 1, name, t);
  if (!out) throw CheckpointError("failed writing checkpoint");
}

CheckpointData read_checkpoint(std::istream& in) {
  Reader r(in);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  ModelConfig& c = data.config;
  c.variant = parse_variant(r.str());
  c.summary = parse_summary(r.str());
  c.vocab_size = r.uint<std::uint64_t>();
  c.embed_dim = r.uint<std::uint64_t>();
  c.hidden_dim = r.uint<std::uint64_t>();
  c.context_dim = r.uint<std::uint64_t>();
  c.maxout_pieces = r.uint<std::uint64_t>();
  c.vocab_hash = r.uint<std::uint64_t>();
  const auto n_meta = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    data.metadata[k] = r.str();
  }
  const auto n_tensors = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto group = r.uint<std::uint8_t>();
    if (group > 1) throw CheckpointError("bad tensor group");
    std::string name = r.str();
    const auto rank = r.uint<std::uint32_t>();
    if (rank == 0 || rank > 8) throw CheckpointError("bad rank for tensor '" + name + "'");
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      const auto dim = r.uint<std::uint64_t>();
      if (dim == 0 || dim > kMaxRecord) throw CheckpointError("bad dimension for tensor '" + name + "'");
      d = static_cast<std::size_t>(dim);
      count *= dim;
      if (count > kMaxRecord) throw CheckpointError("tensor '" + name + "' too large");
    }
    std::vector<double> values(count);
    for (double& v : values) v = r.f64();
    auto& target = group == 0 ? data.params : data.state;
    if (!target.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
      throw CheckpointError("duplicate tensor '" + name + "'");
    }
  }
  return data;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, data);
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void save_model(const std::filesystem::path& path, const DialogueModel& model) {
  save_checkpoint(path, CheckpointData{model.config(), model.params(), {}, {}});
}

DialogueModel load_model(const std::filesystem::path& path) {
  CheckpointData data = load_checkpoint(path);
  return DialogueModel(data.config, std::move(data.params));
}

}  // namespace hred
