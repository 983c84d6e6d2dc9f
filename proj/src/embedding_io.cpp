#include "hred/embedding_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hred {

namespace {
bool is_unsigned_integer(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}
}  // namespace

EmbeddingTable read_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<std::string> rest;
    for (std::string f; fields >> f;) rest.push_back(f);

    if (line_no == 1 && rest.size() == 1 && is_unsigned_integer(token) && is_unsigned_integer(rest[0])) {
      continue;
    }
    std::vector<double> vec;
    vec.reserve(rest.size());
    for (const auto& f : rest) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f.size() || !std::isfinite(v)) {
        throw std::runtime_error("embeddings line " + std::to_string(line_no) + ": bad value '" + f + "'");
      }
      vec.push_back(v);
    }
    if (vec.empty()) {
      throw std::runtime_error("embeddings line " + std::to_string(line_no) + ": no values");
    }
    if (table.dim == 0) table.dim = vec.size();
    if (vec.size() != table.dim) {
      throw std::runtime_error("embeddings line " + std::to_string(line_no) + ": expected " +
                               std::to_string(table.dim) + " values, got " + std::to_string(vec.size()));
    }
    table.vectors.insert_or_assign(token, std::move(vec));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file " + path.string());
  return read_embeddings(in);
}

}  // namespace hred
