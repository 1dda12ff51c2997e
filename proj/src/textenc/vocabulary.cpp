#include <algorithm>
#include <stdexcept>

#include "mtvqa/error.hpp"
#include "mtvqa/textenc.hpp"

namespace mtvqa::textenc {

Vocabulary::Vocabulary() { add(kPadToken); }

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kPad : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw FormatError("textenc", "token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.empty() || tokens.front() != kPadToken) {
    throw FormatError("textenc", "vocabulary must start with the padding token");
  }
  Vocabulary v;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != static_cast<int>(i)) throw FormatError("textenc", "duplicate vocabulary token '" + tokens[i] + "'");
  }
  return v;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpora) {
  Vocabulary v;
  for (const auto& tokens : corpora)
    for (const auto& t : tokens) v.add(t);
  return v;
}

std::vector<int> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("textenc", "max_len must be at least 1");
  std::vector<int> ids(max_len, Vocabulary::kPad);
  for (std::size_t i = 0; i < std::min(max_len, tokens.size()); ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id != Vocabulary::kPad) out.push_back(vocab.token(id));
  }
  return out;
}

LabelSet::LabelSet(const std::vector<std::string>& labels) {
  for (const auto& l : labels) add(l);
}

int LabelSet::add(const std::string& label) {
  auto [it, inserted] = ids_.emplace(label, static_cast<int>(labels_.size()));
  if (inserted) labels_.push_back(label);
  return it->second;
}

int LabelSet::id(const std::string& label) const {
  auto it = ids_.find(label);
  return it == ids_.end() ? -1 : it->second;
}

}  // namespace mtvqa::textenc
