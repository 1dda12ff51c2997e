#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "mtvqa/error.hpp"
#include "mtvqa/textenc.hpp"

namespace mtvqa::textenc {

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t embed_dim, std::uint64_t seed) {
  if (embed_dim == 0) throw ConfigError("textenc", "embed_dim must be positive");
  EmbeddingTable table{ad::Tensor({vocab.size(), embed_dim}), true};
  std::mt19937_64 rng(seed);
  const double bound = 0.5 / static_cast<double>(embed_dim);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = embed_dim; i < table.weights.size(); ++i) table.weights[i] = dist(rng);
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t embed_dim,
                               std::uint64_t seed, EmbeddingLoadStats* stats) {
  EmbeddingTable table = random_embeddings(vocab, embed_dim, seed);
  std::ifstream in(path);
  if (!in) throw IoError("textenc", "cannot read embeddings " + path.string());
  std::vector<bool> found(vocab.size(), false);
  std::string line, token;
  std::size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    if (!(ss >> token)) continue;
    row.clear();
    for (double v; ss >> v;) row.push_back(v);
    if (!ss.eof()) throw FormatError("textenc", path.string() + " line " + std::to_string(line_no) + ": non-numeric value");
    if (row.size() != embed_dim) {
      throw FormatError("textenc", path.string() + " line " + std::to_string(line_no) + ": expected " +
                                       std::to_string(embed_dim) + " values, got " + std::to_string(row.size()));
    }
    const int id = vocab.id(token);
    if (id == Vocabulary::kPad) continue;
    std::copy(row.begin(), row.end(), table.weights.row(static_cast<std::size_t>(id)).begin());
    found[static_cast<std::size_t>(id)] = true;
  }
  if (stats) {
    stats->found = static_cast<std::size_t>(std::count(found.begin(), found.end(), true));
    stats->random = vocab.size() - 1 - stats->found;
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t embed_dim,
                               std::uint64_t seed) {
  return load_embeddings(path, vocab, embed_dim, seed, nullptr);
}

}  // namespace mtvqa::textenc
