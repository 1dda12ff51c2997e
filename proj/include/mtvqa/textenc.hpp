#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtvqa/autodiff/tensor.hpp"

namespace mtvqa::textenc {

/// Token <-> id bijection. Id 0 is always the padding token; unknown tokens
/// encode to it as well.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr const char* kPadToken = "<pad>";

  Vocabulary();

  /// Returns the id of `token`, assigning the next free id if new.
  int add(const std::string& token);
  /// Id of `token`, or kPad when absent.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(int id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Rebuilds from an id-ordered token list whose first entry is the pad token.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Ids in first-occurrence order starting at 1.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpora);

/// Exactly `max_len` ids: truncated or right-padded with kPad.
std::vector<int> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len);
/// Inverse of encode with padding dropped.
std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab);

/// Dense label set for answers: ids 0..K-1 in first-occurrence order, no padding.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(const std::vector<std::string>& labels);

  int add(const std::string& label);
  /// -1 when the label was never seen.
  int id(const std::string& label) const;
  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> ids_;
};

/// vocab_size x embed_dim table; row 0 (padding) is all zero and the
/// embedding operator never routes gradient into it.
struct EmbeddingTable {
  ad::Tensor weights;
  bool trainable = true;
};

/// Every non-pad row drawn uniform(-0.5/embed_dim, 0.5/embed_dim).
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t embed_dim, std::uint64_t seed);

/// GloVe-style text file: `<token> <v1> ... <v_embed_dim>` per line. Rows of
/// in-vocabulary tokens are copied verbatim; the rest keep their seeded
/// random initialisation. Throws FormatError with the line number on a
/// dimension mismatch.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t embed_dim,
                               std::uint64_t seed);

struct EmbeddingLoadStats {
  std::size_t found = 0;
  std::size_t random = 0;
};

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t embed_dim,
                               std::uint64_t seed, EmbeddingLoadStats* stats);

}  // namespace mtvqa::textenc
